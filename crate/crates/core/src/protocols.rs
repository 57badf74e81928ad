//! The train/test split protocols as declarative data: PU artificial-vs-real
//! and 10-fold real-data combinations, four CWRU class layouts, and the MFPT
//! table (including its healthy-set overlap, reproduced verbatim).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::ClassLabel;
use crate::error::MbfdError;
use crate::Result;

/// How recordings become train/test samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentationRule {
    /// Each recording is one fixed-length sample.
    WholeRecording,
    /// Split each recording 80/20 in time, then cut 400 ms windows on each
    /// side. Train and test share source files but not time ranges.
    Time8020Then400ms,
    /// Cut 400 ms windows with 50% overlap on each side's sources.
    Segment400ms50Pct,
}

/// One class of a split: its label and the source recordings assigned to
/// each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSplit {
    pub label: ClassLabel,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// A complete train/test protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub name: String,
    pub rule: SegmentationRule,
    pub classes: Vec<ClassSplit>,
}

impl SplitSpec {
    /// Checks structural invariants: unique class indices, no source in two
    /// classes, and train/test disjointness where the rule implies it.
    pub fn validate(&self) -> Result<()> {
        let mut indices = std::collections::HashSet::new();
        let mut owners: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
        for c in &self.classes {
            if !indices.insert(c.label.index) {
                return Err(MbfdError::InvalidConfig(format!(
                    "{}: duplicate class index {}",
                    self.name, c.label.index
                )));
            }
            for s in c.train.iter().chain(&c.test) {
                if let Some(&other) = owners.get(s.as_str()) {
                    if other != c.label.index {
                        return Err(MbfdError::InvalidConfig(format!(
                            "{}: source {s} in classes {other} and {}",
                            self.name, c.label.index
                        )));
                    }
                }
                owners.insert(s, c.label.index);
            }
            if self.rule != SegmentationRule::Time8020Then400ms {
                for s in &c.train {
                    if c.test.contains(s) {
                        // the MFPT table prints N2 on both sides; keep it but
                        // make the overlap visible
                        log::warn!("{}: source {s} appears in both train and test", self.name);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }
}

fn label(index: usize, name: &str) -> ClassLabel {
    ClassLabel { index, name: name.to_string() }
}

fn strs(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// PU case 1: train on artificially damaged bearings, test on real damages.
pub fn pu_c1() -> SplitSpec {
    SplitSpec {
        name: "PU-C1".into(),
        rule: SegmentationRule::WholeRecording,
        classes: vec![
            ClassSplit {
                label: label(0, "healthy"),
                train: strs(&["K002"]),
                test: strs(&["K001"]),
            },
            ClassSplit {
                label: label(1, "outer-ring"),
                train: strs(&["KA01", "KA05", "KA07"]),
                test: strs(&["KA22", "KA04", "KA15", "KA30", "KA16"]),
            },
            ClassSplit {
                label: label(2, "inner-ring"),
                train: strs(&["KI01", "KI05", "KI07"]),
                test: strs(&["KI14", "KI21", "KI17", "KI18", "KI16"]),
            },
        ],
    }
}

const PU_C2_POOLS: [(&str, [&str; 5]); 3] = [
    ("healthy", ["K001", "K002", "K003", "K004", "K005"]),
    ("outer-ring", ["KA04", "KA15", "KA16", "KA22", "KA30"]),
    ("inner-ring", ["KI04", "KI14", "KI16", "KI18", "KI21"]),
];

/// choose(5,3) index triples in lexicographic order.
fn choose_5_3() -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..5 {
        for b in a + 1..5 {
            for c in b + 1..5 {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// PU case 2: 10 real-data combinations, three bearings per class for
/// training and the remaining two for testing, with the same subset
/// positions applied to all three classes.
pub fn pu_c2_combinations() -> Vec<SplitSpec> {
    choose_5_3()
        .iter()
        .enumerate()
        .map(|(k, combo)| SplitSpec {
            name: format!("PU-C2-{}", k + 1),
            rule: SegmentationRule::WholeRecording,
            classes: PU_C2_POOLS
                .iter()
                .enumerate()
                .map(|(ci, (cname, pool))| {
                    let train: Vec<String> =
                        combo.iter().map(|&i| pool[i].to_string()).collect();
                    let test: Vec<String> = (0..5)
                        .filter(|i| !combo.contains(i))
                        .map(|i| pool[i].to_string())
                        .collect();
                    ClassSplit { label: label(ci, cname), train, test }
                })
                .collect(),
        })
        .collect()
}

const CWRU_DIAMETERS: [&str; 4] = ["007", "014", "021", "028"];

/// All 64 CWRU files of case 3, in the table's class order.
fn cwru_c3_files() -> Vec<String> {
    let mut files: Vec<String> = Vec::new();
    let suffixed = |base: &str, files: &mut Vec<String>| {
        for s in 0..4 {
            files.push(format!("{base}_{s}"));
        }
    };
    suffixed("Normal", &mut files);
    for d in CWRU_DIAMETERS {
        suffixed(&format!("IR{d}"), &mut files);
    }
    for d in CWRU_DIAMETERS {
        suffixed(&format!("B{d}"), &mut files);
    }
    for d in ["007", "014", "021"] {
        suffixed(&format!("OR{d}@6"), &mut files);
    }
    for d in ["007", "021"] {
        suffixed(&format!("OR{d}@3"), &mut files);
    }
    for d in ["007", "021"] {
        suffixed(&format!("OR{d}@12"), &mut files);
    }
    files
}

/// CWRU cases 1-4. Cases 1-3 split each file 80/20 in time; case 4 trains
/// on the _0/_1 files (1797/1772 rpm) and tests on _2/_3 (1750/1730 rpm).
pub fn cwru_split(case: usize) -> Result<SplitSpec> {
    let spec = match case {
        1 => {
            let files = ["Normal_0", "IR007_0", "B007_0", "OR007@6_0", "OR007@3_0", "OR007@12_0"];
            let names = ["healthy", "inner-race", "ball", "outer-centered", "outer-orthogonal", "outer-opposite"];
            SplitSpec {
                name: "CWRU-C1".into(),
                rule: SegmentationRule::Time8020Then400ms,
                classes: files
                    .iter()
                    .zip(names)
                    .enumerate()
                    .map(|(i, (f, n))| ClassSplit {
                        label: label(i, n),
                        train: strs(&[f]),
                        test: strs(&[f]),
                    })
                    .collect(),
            }
        }
        2 => {
            let mut files: Vec<String> = Vec::new();
            for base in ["Normal", "IR007", "B007", "OR007@6", "OR007@3", "OR007@12"] {
                for s in 0..4 {
                    files.push(format!("{base}_{s}"));
                }
            }
            SplitSpec {
                name: "CWRU-C2".into(),
                rule: SegmentationRule::Time8020Then400ms,
                classes: files
                    .iter()
                    .enumerate()
                    .map(|(i, f)| ClassSplit {
                        label: label(i, f),
                        train: vec![f.clone()],
                        test: vec![f.clone()],
                    })
                    .collect(),
            }
        }
        3 => {
            // the table's "Class 21: IR021_1" between classes 13 and 15 is a
            // printed typo; positional order makes it class 14
            let files = cwru_c3_files();
            SplitSpec {
                name: "CWRU-C3".into(),
                rule: SegmentationRule::Time8020Then400ms,
                classes: files
                    .iter()
                    .enumerate()
                    .map(|(i, f)| ClassSplit {
                        label: label(i, f),
                        train: vec![f.clone()],
                        test: vec![f.clone()],
                    })
                    .collect(),
            }
        }
        4 => {
            let ir: Vec<String> =
                CWRU_DIAMETERS.iter().map(|d| format!("IR{d}")).collect();
            let ball: Vec<String> =
                CWRU_DIAMETERS.iter().map(|d| format!("B{d}")).collect();
            let outer: Vec<String> = ["007", "014", "021"]
                .iter()
                .map(|d| format!("OR{d}@6"))
                .chain(["007", "021"].iter().map(|d| format!("OR{d}@3")))
                .chain(["007", "021"].iter().map(|d| format!("OR{d}@12")))
                .collect();
            let groups: [(&str, Vec<String>); 4] = [
                ("healthy", vec!["Normal".to_string()]),
                ("inner-race", ir),
                ("ball", ball),
                ("outer-race", outer),
            ];
            SplitSpec {
                name: "CWRU-C4".into(),
                rule: SegmentationRule::Segment400ms50Pct,
                classes: groups
                    .iter()
                    .enumerate()
                    .map(|(i, (n, bases))| ClassSplit {
                        label: label(i, n),
                        train: bases
                            .iter()
                            .flat_map(|b| [format!("{b}_0"), format!("{b}_1")])
                            .collect(),
                        test: bases
                            .iter()
                            .flat_map(|b| [format!("{b}_2"), format!("{b}_3")])
                            .collect(),
                    })
                    .collect(),
            }
        }
        other => {
            return Err(MbfdError::InvalidConfig(format!("CWRU case {other} (expected 1-4)")))
        }
    };
    Ok(spec)
}

/// MFPT split per the published table. The healthy set lists N2 on both
/// sides; `strict_disjoint` substitutes train {N1} / test {N2, N3} instead.
pub fn mfpt_split(strict_disjoint: bool) -> SplitSpec {
    let (healthy_train, healthy_test) = if strict_disjoint {
        (strs(&["N1"]), strs(&["N2", "N3"]))
    } else {
        log::warn!("MFPT: healthy recording N2 appears in both train and test (as published)");
        (strs(&["N1", "N2"]), strs(&["N2", "N3"]))
    };
    SplitSpec {
        name: "MFPT".into(),
        rule: SegmentationRule::Segment400ms50Pct,
        classes: vec![
            ClassSplit { label: label(0, "healthy"), train: healthy_train, test: healthy_test },
            ClassSplit {
                label: label(1, "outer-race"),
                train: strs(&["O1", "O2", "OM1", "OM2", "OM4", "OM5", "OM7"]),
                test: strs(&["O3", "OM3", "OM6"]),
            },
            ClassSplit {
                label: label(2, "inner-race"),
                train: strs(&["I1", "I2", "I4", "I5", "I7"]),
                test: strs(&["I3", "I6"]),
            },
        ],
    }
}

pub fn export_split(path: &Path, spec: &SplitSpec) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| MbfdError::Io { path: path.to_path_buf(), source: e })?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), spec)?;
    Ok(())
}

pub fn import_split(path: &Path) -> Result<SplitSpec> {
    let file = std::fs::File::open(path)
        .map_err(|e| MbfdError::Io { path: path.to_path_buf(), source: e })?;
    let spec: SplitSpec = serde_json::from_reader(std::io::BufReader::new(file))?;
    spec.validate()?;
    Ok(spec)
}

/// Looks up a protocol by name ("PU-C1", "PU-C2-3", "CWRU-C2", "MFPT", ...).
pub fn by_name(name: &str, strict_disjoint: bool) -> Result<SplitSpec> {
    if name.eq_ignore_ascii_case("PU-C1") {
        return Ok(pu_c1());
    }
    if let Some(k) = name.to_ascii_uppercase().strip_prefix("PU-C2-").and_then(|s| s.parse::<usize>().ok()) {
        let combos = pu_c2_combinations();
        return combos
            .into_iter()
            .nth(k.wrapping_sub(1))
            .ok_or_else(|| MbfdError::InvalidConfig(format!("PU-C2 combination {k} (expected 1-10)")));
    }
    if let Some(c) = name.to_ascii_uppercase().strip_prefix("CWRU-C").and_then(|s| s.parse::<usize>().ok()) {
        return cwru_split(c);
    }
    if name.eq_ignore_ascii_case("MFPT") {
        return Ok(mfpt_split(strict_disjoint));
    }
    Err(MbfdError::InvalidConfig(format!("unknown split {name:?}")))
}
