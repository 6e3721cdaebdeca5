fn main() {
    std::process::exit(rankqa_cli::run());
}
