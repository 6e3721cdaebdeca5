//! Leakage categorization, leakage-group discovery, and the faithful
//! train/dev split.
//!
//! Samples are labeled with four mutually exclusive categories, evaluated in
//! order:
//!
//! * **D1** — a (passage, answer) or (question, answer) pair occurs in more
//!   than one sample: memorizable leakage if such samples straddle the split.
//! * **D2** — the passage occurs in more than one sample but every such
//!   co-occurrence has distinct answers.
//! * **D3** — remaining samples whose question occurs rarely (three times or
//!   fewer in the whole dataset): out-of-distribution hard.
//! * **D4** — remaining samples whose question occurs more than three times.
//!
//! Equality of passages, questions and answers is canonical-text equality
//! ([`crate::text::canonical`]); a zero-answer sample contributes the empty
//! answer key, so zero-answer samples sharing a passage (or a question) are
//! D1 and leakage groups are either entirely zero-answer or entirely not.
//!
//! The faithful split routes D3 to dev, D4 to train, D1 to train (moving
//! whole zero-answer groups to dev, smallest first, until the dev
//! zero-answer ratio reaches a target), and distributes each repeated D2
//! passage across both sides so the sides overlap in passages but never in
//! (passage, answer) pairs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MrcSample, REPORT_SCHEMA_VERSION};
use crate::text::canonical;

/// Dev share used when distributing repeated-passage (D2) samples: the
/// original corpus split kept 86.7% of pairs in train and 13.3% in dev.
/// Expressed as an exact integer ratio so the allocation is pure integer
/// arithmetic.
const D2_DEV_NUMER: usize = 133;
const D2_DEV_DENOM: usize = 1000;

/// Mutually exclusive leakage category of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LeakageCategory {
    /// Repeated (passage, answer) or (question, answer) pair.
    D1InLeakage,
    /// Repeated passage, all answers distinct.
    D2InNoLeakage,
    /// Unique passage, question appearing ≤ 3 times.
    D3OodHard,
    /// Unique passage, question appearing > 3 times.
    D4OodEasy,
}

impl LeakageCategory {
    /// All categories in evaluation order.
    pub const ALL: [LeakageCategory; 4] = [
        LeakageCategory::D1InLeakage,
        LeakageCategory::D2InNoLeakage,
        LeakageCategory::D3OodHard,
        LeakageCategory::D4OodEasy,
    ];

    /// Short table label.
    pub fn label(self) -> &'static str {
        match self {
            LeakageCategory::D1InLeakage => "D1",
            LeakageCategory::D2InNoLeakage => "D2",
            LeakageCategory::D3OodHard => "D3",
            LeakageCategory::D4OodEasy => "D4",
        }
    }

    /// One-line description for reports.
    pub fn description(self) -> &'static str {
        match self {
            LeakageCategory::D1InLeakage => "repeated passage-answer or question-answer pairs",
            LeakageCategory::D2InNoLeakage => "repeated passages with unique answers",
            LeakageCategory::D3OodHard => "unique passages, question appearing <= 3 times",
            LeakageCategory::D4OodEasy => "unique passages, question appearing > 3 times",
        }
    }
}

/// A connected component of D1 samples under shared-pair edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageGroup {
    /// Smallest member sample id; stable identifier of the component.
    pub group_id: String,
    /// Sorted member sample ids.
    pub members: Vec<String>,
    /// Whether the group is made of zero-answer samples. Because the
    /// zero-answer key never equals a real answer key, a group is either
    /// entirely zero-answer or entirely not.
    pub contains_zero_answer: bool,
}

impl LeakageGroup {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Which side of the split a sample landed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
}

/// Sample / zero-answer tallies for one side of one category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub samples: usize,
    pub zero_answer: usize,
}

impl SplitCounts {
    fn add(&mut self, zero: bool) {
        self.samples += 1;
        if zero {
            self.zero_answer += 1;
        }
    }
}

/// Per-category train/dev tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: LeakageCategory,
    pub train: SplitCounts,
    pub dev: SplitCounts,
}

/// Result of the faithful split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub schema_version: u32,
    /// sample id → side. Every input sample appears exactly once.
    pub assignment: BTreeMap<String, Split>,
    /// Tallies per category, in D1..D4 order.
    pub rows: Vec<CategoryRow>,
    pub train_total: SplitCounts,
    pub dev_total: SplitCounts,
    /// Zero-answer D1 groups moved wholesale to dev.
    pub moved_zero_groups: usize,
    pub target_zero_ratio: f64,
    /// Final dev zero-answer ratio (0 when dev is empty).
    pub achieved_zero_ratio: f64,
    pub warnings: Vec<String>,
}

/// Leakage analysis over a dataset: per-sample categories plus the D1
/// group structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub schema_version: u32,
    pub n_samples: usize,
    pub n_zero_answer: usize,
    /// sample id → category.
    pub categories: BTreeMap<String, LeakageCategory>,
    /// Sample count per category.
    pub category_counts: BTreeMap<LeakageCategory, usize>,
    /// Zero-answer sample count per category.
    pub category_zero_counts: BTreeMap<LeakageCategory, usize>,
    /// D1 connected components, sorted by group id.
    pub groups: Vec<LeakageGroup>,
    pub n_zero_groups: usize,
    pub max_group_size: usize,
}

/// Canonical comparison keys of one sample.
struct SampleKeys {
    passage: String,
    question: String,
    /// Distinct canonical answer texts; the single empty string for a
    /// zero-answer sample.
    answers: Vec<String>,
}

fn keys_of(sample: &MrcSample) -> SampleKeys {
    let mut answers: Vec<String> = if sample.is_zero_answer() {
        vec![String::new()]
    } else {
        sample.gold.iter().map(|g| canonical(&g.text)).collect()
    };
    answers.sort();
    answers.dedup();
    SampleKeys {
        passage: canonical(&sample.passage),
        question: canonical(&sample.question),
        answers,
    }
}

fn check_unique_ids(samples: &[MrcSample]) -> Result<()> {
    let mut seen = BTreeMap::new();
    for sample in samples {
        if seen.insert(sample.sample_id.as_str(), ()).is_some() {
            return Err(Error::integrity(format!(
                "duplicate sample id {} in leakage input",
                sample.sample_id
            )));
        }
    }
    Ok(())
}

/// Label every sample with its leakage category.
pub fn categorize(samples: &[MrcSample]) -> Result<BTreeMap<String, LeakageCategory>> {
    check_unique_ids(samples)?;
    let keys: Vec<SampleKeys> = samples.iter().map(keys_of).collect();

    // Multiplicity of each pair / passage / question over the whole dataset.
    // Answer keys are deduplicated per sample, so counts are sample counts.
    let mut passage_answer: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut question_answer: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut passages: BTreeMap<&str, usize> = BTreeMap::new();
    let mut questions: BTreeMap<&str, usize> = BTreeMap::new();
    for k in &keys {
        *passages.entry(&k.passage).or_insert(0) += 1;
        *questions.entry(&k.question).or_insert(0) += 1;
        for a in &k.answers {
            *passage_answer.entry((&k.passage, a)).or_insert(0) += 1;
            *question_answer.entry((&k.question, a)).or_insert(0) += 1;
        }
    }

    let mut out = BTreeMap::new();
    for (sample, k) in samples.iter().zip(&keys) {
        let repeated_pair = k.answers.iter().any(|a| {
            passage_answer[&(k.passage.as_str(), a.as_str())] >= 2
                || question_answer[&(k.question.as_str(), a.as_str())] >= 2
        });
        let category = if repeated_pair {
            LeakageCategory::D1InLeakage
        } else if passages[k.passage.as_str()] >= 2 {
            LeakageCategory::D2InNoLeakage
        } else if questions[k.question.as_str()] <= 3 {
            LeakageCategory::D3OodHard
        } else {
            LeakageCategory::D4OodEasy
        };
        out.insert(sample.sample_id.clone(), category);
    }
    Ok(out)
}

/// Disjoint-set forest with union by size and path halving.
struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Connected components of the given samples under shared
/// (passage, answer) / (question, answer) pair edges.
///
/// Callers normally pass the D1 subset; the operation itself accepts any
/// sample list. Output is sorted by group id and invariant to input order.
pub fn group_leakage(samples: &[MrcSample]) -> Result<Vec<LeakageGroup>> {
    check_unique_ids(samples)?;
    let keys: Vec<SampleKeys> = samples.iter().map(keys_of).collect();
    let mut dsu = DisjointSet::new(samples.len());

    // First sample seen holding each pair; later holders union into it.
    let mut owner: BTreeMap<(u8, &str, &str), usize> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        for a in &k.answers {
            for (kind, text) in [(0u8, k.passage.as_str()), (1u8, k.question.as_str())] {
                match owner.entry((kind, text, a.as_str())) {
                    std::collections::btree_map::Entry::Vacant(v) => {
                        v.insert(i);
                    }
                    std::collections::btree_map::Entry::Occupied(o) => {
                        dsu.union(*o.get(), i);
                    }
                }
            }
        }
    }

    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..samples.len() {
        let root = dsu.find(i);
        components.entry(root).or_default().push(i);
    }
    let mut groups: Vec<LeakageGroup> = components
        .into_values()
        .map(|indices| {
            let mut members: Vec<String> =
                indices.iter().map(|&i| samples[i].sample_id.clone()).collect();
            members.sort();
            let contains_zero_answer = indices.iter().any(|&i| samples[i].is_zero_answer());
            LeakageGroup { group_id: members[0].clone(), members, contains_zero_answer }
        })
        .collect();
    groups.sort_by(|a, b| a.group_id.cmp(&b.group_id));
    Ok(groups)
}

/// Full leakage analysis: categories, per-category tallies, D1 groups.
pub fn analyze_leakage(samples: &[MrcSample]) -> Result<LeakageReport> {
    let categories = categorize(samples)?;
    let by_id: BTreeMap<&str, &MrcSample> =
        samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();

    let mut category_counts = BTreeMap::new();
    let mut category_zero_counts = BTreeMap::new();
    for category in LeakageCategory::ALL {
        category_counts.insert(category, 0usize);
        category_zero_counts.insert(category, 0usize);
    }
    let mut n_zero_answer = 0;
    for (sample_id, category) in &categories {
        *category_counts.get_mut(category).expect("all categories preseeded") += 1;
        if by_id[sample_id.as_str()].is_zero_answer() {
            n_zero_answer += 1;
            *category_zero_counts.get_mut(category).expect("all categories preseeded") += 1;
        }
    }

    let d1: Vec<MrcSample> = samples
        .iter()
        .filter(|s| categories[&s.sample_id] == LeakageCategory::D1InLeakage)
        .cloned()
        .collect();
    let groups = group_leakage(&d1)?;
    let n_zero_groups = groups.iter().filter(|g| g.contains_zero_answer).count();
    let max_group_size = groups.iter().map(LeakageGroup::len).max().unwrap_or(0);

    Ok(LeakageReport {
        schema_version: REPORT_SCHEMA_VERSION,
        n_samples: samples.len(),
        n_zero_answer,
        categories,
        category_counts,
        category_zero_counts,
        groups,
        n_zero_groups,
        max_group_size,
    })
}

/// Distribute one repeated-passage group of `n ≥ 2` samples: dev takes
/// `max(1, round(n·13.3%))` members, spread through the group by an integer
/// Bresenham walk so consecutive members alternate sides evenly.
fn d2_group_dev_picks(n: usize) -> Vec<bool> {
    let ideal = (n * D2_DEV_NUMER + D2_DEV_DENOM / 2) / D2_DEV_DENOM;
    let dev_count = ideal.max(1).min(n - 1); // both sides stay non-empty
    let mut picks = vec![false; n];
    let mut err = 0usize;
    for pick in picks.iter_mut() {
        err += dev_count;
        if err >= n {
            err -= n;
            *pick = true;
        }
    }
    picks
}

/// Produce the faithful train/dev split.
///
/// `target_zero_ratio` is the desired share of zero-answer samples in dev
/// (e.g. 0.067); zero-answer D1 groups are moved to dev, smallest first,
/// until the ratio is reached. An unreachable target degrades to a
/// best-effort split with a warning.
pub fn faithful_split(samples: &[MrcSample], target_zero_ratio: f64) -> Result<SplitAssignment> {
    if !target_zero_ratio.is_finite() || !(0.0..=1.0).contains(&target_zero_ratio) {
        return Err(Error::contract(format!(
            "target zero-answer ratio must be in [0, 1], got {target_zero_ratio}"
        )));
    }
    let categories = categorize(samples)?;
    let mut warnings = Vec::new();
    let mut assignment: BTreeMap<String, Split> = BTreeMap::new();

    // D3 → dev, D4 → train.
    for sample in samples {
        match categories[&sample.sample_id] {
            LeakageCategory::D3OodHard => {
                assignment.insert(sample.sample_id.clone(), Split::Dev);
            }
            LeakageCategory::D4OodEasy => {
                assignment.insert(sample.sample_id.clone(), Split::Train);
            }
            _ => {}
        }
    }

    // D2: group by passage key; multi-sample groups straddle the boundary
    // (the passages overlap across sides, the answers never do); leftover
    // singletons — passages whose other occurrences were taken by D1 — are
    // rationed globally at the same dev share.
    let mut d2_groups: BTreeMap<String, Vec<&MrcSample>> = BTreeMap::new();
    for sample in samples {
        if categories[&sample.sample_id] == LeakageCategory::D2InNoLeakage {
            d2_groups.entry(canonical(&sample.passage)).or_default().push(sample);
        }
    }
    let mut singleton_err = 0usize;
    for group in d2_groups.values_mut() {
        group.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        if group.len() == 1 {
            singleton_err += D2_DEV_NUMER;
            let side = if singleton_err >= D2_DEV_DENOM {
                singleton_err -= D2_DEV_DENOM;
                Split::Dev
            } else {
                Split::Train
            };
            assignment.insert(group[0].sample_id.clone(), side);
        } else {
            let picks = d2_group_dev_picks(group.len());
            for (sample, dev) in group.iter().zip(picks) {
                assignment
                    .insert(sample.sample_id.clone(), if dev { Split::Dev } else { Split::Train });
            }
        }
    }

    // D1: all to train, then move whole zero-answer groups to dev, smallest
    // first, until dev's zero-answer share reaches the target.
    let d1: Vec<MrcSample> = samples
        .iter()
        .filter(|s| categories[&s.sample_id] == LeakageCategory::D1InLeakage)
        .cloned()
        .collect();
    for sample in &d1 {
        assignment.insert(sample.sample_id.clone(), Split::Train);
    }
    let groups = group_leakage(&d1)?;

    let by_id: BTreeMap<&str, &MrcSample> =
        samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();
    let mut dev_total = 0usize;
    let mut dev_zero = 0usize;
    for (sample_id, side) in &assignment {
        if *side == Split::Dev {
            dev_total += 1;
            if by_id[sample_id.as_str()].is_zero_answer() {
                dev_zero += 1;
            }
        }
    }

    let ratio = |zero: usize, total: usize| {
        if total == 0 {
            0.0
        } else {
            zero as f64 / total as f64
        }
    };
    let mut movable: Vec<&LeakageGroup> =
        groups.iter().filter(|g| g.contains_zero_answer).collect();
    movable.sort_by(|a, b| a.len().cmp(&b.len()).then(a.group_id.cmp(&b.group_id)));
    let mut moved_zero_groups = 0usize;
    let mut movable = movable.into_iter();
    while ratio(dev_zero, dev_total) < target_zero_ratio {
        match movable.next() {
            Some(group) => {
                for member in &group.members {
                    assignment.insert(member.clone(), Split::Dev);
                    dev_total += 1;
                    if by_id[member.as_str()].is_zero_answer() {
                        dev_zero += 1;
                    }
                }
                moved_zero_groups += 1;
            }
            None => {
                warnings.push(format!(
                    "dev zero-answer ratio target {target_zero_ratio} is unreachable; \
                     best effort {:.4} after moving all {moved_zero_groups} zero-answer group(s)",
                    ratio(dev_zero, dev_total)
                ));
                break;
            }
        }
    }

    // Tallies.
    let mut rows: Vec<CategoryRow> = LeakageCategory::ALL
        .iter()
        .map(|&category| CategoryRow {
            category,
            train: SplitCounts::default(),
            dev: SplitCounts::default(),
        })
        .collect();
    let mut train_total = SplitCounts::default();
    let mut dev_total_counts = SplitCounts::default();
    for sample in samples {
        let category = categories[&sample.sample_id];
        let row = rows
            .iter_mut()
            .find(|r| r.category == category)
            .expect("all categories present in rows");
        let zero = sample.is_zero_answer();
        match assignment[&sample.sample_id] {
            Split::Train => {
                row.train.add(zero);
                train_total.add(zero);
            }
            Split::Dev => {
                row.dev.add(zero);
                dev_total_counts.add(zero);
            }
        }
    }
    debug_assert_eq!(train_total.samples + dev_total_counts.samples, samples.len());

    Ok(SplitAssignment {
        schema_version: REPORT_SCHEMA_VERSION,
        assignment,
        rows,
        train_total,
        dev_total: dev_total_counts,
        moved_zero_groups,
        target_zero_ratio,
        achieved_zero_ratio: ratio(dev_total_counts.zero_answer, dev_total_counts.samples),
        warnings,
    })
}
