//! View-state transformations: class selection, superclass aggregation,
//! iteration slicing, and rankings that help pick classes when K is large.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{ClassCounts, Normalization, ScaleMode};
use crate::model::{ClassAlphabet, ConfusionCube, CountMatrix, EpochConfusion};

/// Above this many visible classes the matrix stops being readable.
pub const SOFT_CLASS_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LensError {
    #[error("at least two classes must stay selected, got {0}")]
    TooFewClasses(usize),
    #[error("class index {index} is outside [0, {k})")]
    UnknownClass { index: usize, k: usize },
    #[error("unknown class `{0}`")]
    UnknownLabel(String),
    #[error("class {0} is selected twice")]
    DuplicateClass(usize),
    #[error("invalid superclass mapping: {0}")]
    InvalidMapping(String),
    #[error("iteration range [{from}, {to}] is inverted")]
    InvalidRange { from: i64, to: i64 },
    #[error("no iterations within [{from}, {to}]")]
    EmptySlice { from: i64, to: i64 },
    #[error("focused iteration {focus} lies outside [{from}, {to}]")]
    FocusOutOfRange { focus: i64, from: i64, to: i64 },
    #[error("count must be at least {min}, got {got}")]
    CountTooSmall { min: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Superclass {
    pub name: String,
    pub members: Vec<usize>,
}

/// Partition of the class indices `0..k` into named groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuperclassMapping {
    groups: Vec<Superclass>,
    #[serde(skip)]
    group_of: Vec<usize>,
}

// JSON shape: [{"name": "...", "members": ["class", ...]}, ...]
#[derive(Deserialize)]
struct NamedGroup {
    name: String,
    members: Vec<String>,
}

impl SuperclassMapping {
    pub fn new(groups: Vec<Superclass>, k: usize) -> Result<Self, LensError> {
        if groups.len() < 2 {
            return Err(LensError::InvalidMapping(format!(
                "need at least two superclasses, got {}",
                groups.len()
            )));
        }
        let mut names = HashSet::new();
        let mut group_of = vec![usize::MAX; k];
        for (g, group) in groups.iter().enumerate() {
            if !names.insert(group.name.as_str()) {
                return Err(LensError::InvalidMapping(format!(
                    "duplicate superclass `{}`",
                    group.name
                )));
            }
            if group.members.is_empty() {
                return Err(LensError::InvalidMapping(format!(
                    "superclass `{}` is empty",
                    group.name
                )));
            }
            for &m in &group.members {
                let slot = group_of.get_mut(m).ok_or(LensError::InvalidMapping(format!(
                    "class index {m} is outside [0, {k})"
                )))?;
                if *slot != usize::MAX {
                    return Err(LensError::InvalidMapping(format!(
                        "class {m} belongs to two superclasses"
                    )));
                }
                *slot = g;
            }
        }
        if let Some(missing) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(LensError::InvalidMapping(format!("class {missing} is not covered")));
        }
        Ok(Self { groups, group_of })
    }

    /// Every class in its own superclass.
    pub fn singletons(alphabet: &ClassAlphabet) -> Self {
        let groups = alphabet
            .labels()
            .iter()
            .enumerate()
            .map(|(i, name)| Superclass {
                name: name.clone(),
                members: vec![i],
            })
            .collect();
        Self::new(groups, alphabet.len()).expect("singleton mapping is a partition")
    }

    /// Parses `[{"name": ..., "members": [class names]}]`.
    pub fn from_json(bytes: &[u8], alphabet: &ClassAlphabet) -> Result<Self, LensError> {
        let named: Vec<NamedGroup> =
            serde_json::from_slice(bytes).map_err(|e| LensError::InvalidMapping(e.to_string()))?;
        let groups = named
            .into_iter()
            .map(|g| {
                let members = g
                    .members
                    .iter()
                    .map(|label| {
                        alphabet
                            .index_of(label)
                            .ok_or_else(|| LensError::UnknownLabel(label.clone()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Superclass { name: g.name, members })
            })
            .collect::<Result<Vec<_>, LensError>>()?;
        Self::new(groups, alphabet.len())
    }

    pub fn groups(&self) -> &[Superclass] {
        &self.groups
    }

    pub fn group_of(&self, class: usize) -> usize {
        self.group_of[class]
    }

    pub fn k(&self) -> usize {
        self.group_of.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.name.clone()).collect()
    }
}

fn check_subset(subset: &[usize], k: usize) -> Result<(), LensError> {
    if subset.len() < 2 {
        return Err(LensError::TooFewClasses(subset.len()));
    }
    let mut seen = HashSet::new();
    for &c in subset {
        if c >= k {
            return Err(LensError::UnknownClass { index: c, k });
        }
        if !seen.insert(c) {
            return Err(LensError::DuplicateClass(c));
        }
    }
    Ok(())
}

/// Restricts the cube to `subset × subset`, in subset order. Confusions with
/// unselected classes are dropped, so iteration totals may shrink.
pub fn select_classes(cube: &ConfusionCube, subset: &[usize]) -> Result<ConfusionCube, LensError> {
    check_subset(subset, cube.k())?;
    let alphabet = ClassAlphabet::new(subset.iter().map(|&c| cube.alphabet().labels()[c].clone()))
        .expect("distinct subset of a valid alphabet");
    let n = subset.len();
    let epochs = cube
        .epochs()
        .iter()
        .map(|e| {
            let mut m = CountMatrix::zeros(n);
            for (a, &i) in subset.iter().enumerate() {
                for (b, &j) in subset.iter().enumerate() {
                    m.set(a, b, e.counts.get(i, j));
                }
            }
            EpochConfusion::new(e.iteration, m)
        })
        .collect();
    Ok(ConfusionCube::from_parts_unchecked(alphabet, epochs))
}

/// Sums confusion blocks per pair of superclasses. Confusion within a
/// superclass lands on the diagonal.
pub fn aggregate_superclasses(cube: &ConfusionCube, mapping: &SuperclassMapping) -> Result<ConfusionCube, LensError> {
    if mapping.k() != cube.k() {
        return Err(LensError::InvalidMapping(format!(
            "mapping covers {} classes, cube has {}",
            mapping.k(),
            cube.k()
        )));
    }
    let alphabet = ClassAlphabet::new(mapping.names()).map_err(|e| LensError::InvalidMapping(e.to_string()))?;
    let g = mapping.groups().len();
    let k = cube.k();
    let epochs = cube
        .epochs()
        .iter()
        .map(|e| {
            let mut m = CountMatrix::zeros(g);
            for i in 0..k {
                let a = mapping.group_of(i);
                for (j, &v) in e.counts.row(i).iter().enumerate() {
                    m.add(a, mapping.group_of(j), v);
                }
            }
            EpochConfusion::new(e.iteration, m)
        })
        .collect();
    Ok(ConfusionCube::from_parts_unchecked(alphabet, epochs))
}

/// Keeps the iterations with `from <= iteration <= to`.
pub fn slice_iterations(cube: &ConfusionCube, from: i64, to: i64) -> Result<ConfusionCube, LensError> {
    if from > to {
        return Err(LensError::InvalidRange { from, to });
    }
    let epochs: Vec<EpochConfusion> = cube
        .epochs()
        .iter()
        .filter(|e| (from..=to).contains(&e.iteration))
        .cloned()
        .collect();
    if epochs.is_empty() {
        return Err(LensError::EmptySlice { from, to });
    }
    Ok(ConfusionCube::from_parts_unchecked(cube.alphabet().clone(), epochs))
}

/// Classes ordered by F1 at the final iteration. ABSENT counts as the worst
/// score; ties go to the lower class index. Returns `min(k, K)` indices.
pub fn rank_classes_by_final_f1(cube: &ConfusionCube, k: usize, ascending: bool) -> Result<Vec<usize>, LensError> {
    if k < 2 {
        return Err(LensError::CountTooSmall { min: 2, got: k });
    }
    let last = cube.last_epoch().ok_or(LensError::EmptySlice {
        from: i64::MIN,
        to: i64::MAX,
    })?;
    let scores: Vec<Option<f64>> = (0..cube.k()).map(|j| ClassCounts::of(&last.counts, j).f1()).collect();
    let mut order: Vec<usize> = (0..cube.k()).collect();
    // Option<f64> orders None below every Some, which makes ABSENT the worst.
    order.sort_by(|&a, &b| {
        let by_score = scores[a].partial_cmp(&scores[b]).expect("scores are finite");
        let by_score = if ascending { by_score } else { by_score.reverse() };
        by_score.then(a.cmp(&b))
    });
    order.truncate(k);
    Ok(order)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankedCell {
    pub row: usize,
    pub col: usize,
    pub count: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CellRanking {
    pub cells: Vec<RankedCell>,
    /// Classes appearing in any ranked cell, ascending.
    pub induced_classes: Vec<usize>,
}

/// Off-diagonal cells with the largest counts at the final iteration. Ties go
/// to the lexicographically smaller `(row, col)`.
pub fn rank_cells_by_final_confusion(cube: &ConfusionCube, k: usize) -> Result<CellRanking, LensError> {
    if k < 1 {
        return Err(LensError::CountTooSmall { min: 1, got: k });
    }
    let last = cube.last_epoch().ok_or(LensError::EmptySlice {
        from: i64::MIN,
        to: i64::MAX,
    })?;
    let n = cube.k();
    let mut cells: Vec<RankedCell> = (0..n)
        .flat_map(|row| (0..n).filter(move |&col| col != row).map(move |col| (row, col)))
        .map(|(row, col)| RankedCell {
            row,
            col,
            count: last.counts.get(row, col),
        })
        .collect();
    cells.sort_by(|a, b| b.count.cmp(&a.count).then((a.row, a.col).cmp(&(b.row, b.col))));
    cells.truncate(k);
    let induced: BTreeSet<usize> = cells.iter().flat_map(|c| [c.row, c.col]).collect();
    Ok(CellRanking {
        cells,
        induced_classes: induced.into_iter().collect(),
    })
}

/// Which classes the matrix shows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum ClassProjection {
    #[default]
    All,
    Subset(Vec<usize>),
    Superclasses(SuperclassMapping),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IterationRange {
    pub from: i64,
    pub to: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum LensWarning {
    #[serde(rename_all = "camelCase")]
    TooManyClasses { visible: usize, limit: usize },
}

impl std::fmt::Display for LensWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LensWarning::TooManyClasses { visible, limit } => write!(
                f,
                "{visible} visible classes exceed the readable limit of {limit}; \
                 narrow the selection by lowest F1 or largest confusion, or aggregate into superclasses"
            ),
        }
    }
}

/// Active view specification. The lens is applied as: slice iterations,
/// then project classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewLens {
    pub classes: ClassProjection,
    pub range: Option<IterationRange>,
    pub focus: Option<i64>,
    pub normalization: Normalization,
    pub scale: ScaleMode,
    pub gamma: f64,
    pub rotated: bool,
}

impl Default for ViewLens {
    fn default() -> Self {
        Self {
            classes: ClassProjection::All,
            range: None,
            focus: None,
            normalization: Normalization::Absolute,
            scale: ScaleMode::Linear,
            gamma: 1.0,
            rotated: false,
        }
    }
}

impl ViewLens {
    pub fn validate(&self, k: usize) -> Result<(), LensError> {
        match &self.classes {
            ClassProjection::All => {}
            ClassProjection::Subset(subset) => check_subset(subset, k)?,
            ClassProjection::Superclasses(mapping) => {
                if mapping.k() != k {
                    return Err(LensError::InvalidMapping(format!(
                        "mapping covers {} classes, run has {k}",
                        mapping.k()
                    )));
                }
            }
        }
        if let Some(IterationRange { from, to }) = self.range {
            if from > to {
                return Err(LensError::InvalidRange { from, to });
            }
            if let Some(focus) = self.focus {
                if !(from..=to).contains(&focus) {
                    return Err(LensError::FocusOutOfRange { focus, from, to });
                }
            }
        }
        Ok(())
    }

    /// Slices iterations, then projects classes.
    pub fn apply(&self, cube: &ConfusionCube) -> Result<ConfusionCube, LensError> {
        self.validate(cube.k())?;
        let sliced = self.slice(cube)?;
        self.project(&sliced)
    }

    pub fn slice(&self, cube: &ConfusionCube) -> Result<ConfusionCube, LensError> {
        match self.range {
            Some(IterationRange { from, to }) => slice_iterations(cube, from, to),
            None => Ok(cube.clone()),
        }
    }

    pub fn project(&self, cube: &ConfusionCube) -> Result<ConfusionCube, LensError> {
        match &self.classes {
            ClassProjection::All => Ok(cube.clone()),
            ClassProjection::Subset(subset) => select_classes(cube, subset),
            ClassProjection::Superclasses(mapping) => aggregate_superclasses(cube, mapping),
        }
    }

    pub fn visible_class_count(&self, k: usize) -> usize {
        match &self.classes {
            ClassProjection::All => k,
            ClassProjection::Subset(subset) => subset.len(),
            ClassProjection::Superclasses(mapping) => mapping.groups().len(),
        }
    }

    pub fn warnings(&self, k: usize) -> Vec<LensWarning> {
        let visible = self.visible_class_count(k);
        if visible > SOFT_CLASS_LIMIT {
            vec![LensWarning::TooManyClasses {
                visible,
                limit: SOFT_CLASS_LIMIT,
            }]
        } else {
            Vec::new()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::accuracy_series;

    fn cube_from(epochs: &[(i64, &[&[i64]])]) -> ConfusionCube {
        let k = epochs[0].1.len();
        ConfusionCube::new(
            ClassAlphabet::numbered(k).unwrap(),
            epochs
                .iter()
                .map(|(t, rows)| EpochConfusion::new(*t, CountMatrix::from_rows(rows).unwrap()))
                .collect(),
        )
        .unwrap()
    }

    fn example() -> ConfusionCube {
        cube_from(&[(0, &[&[1, 1, 0], &[0, 2, 0], &[0, 0, 1]])])
    }

    fn counting(n: i64) -> ConfusionCube {
        let rows: &[&[i64]] = &[&[3, 1], &[0, 2]];
        ConfusionCube::new(
            ClassAlphabet::numbered(2).unwrap(),
            (0..n)
                .map(|t| EpochConfusion::new(t, CountMatrix::from_rows(rows).unwrap()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn selection() {
        let c = example();
        let s = select_classes(&c, &[0, 1]).unwrap();
        assert_eq!(s.epochs()[0].counts.to_rows(), vec![vec![1, 1], vec![0, 2]]);
        assert_eq!(s.alphabet().labels(), &["0".to_string(), "1".to_string()]);
        assert_eq!(select_classes(&c, &[0, 1, 2]).unwrap(), c);
        assert_eq!(select_classes(&c, &[0]), Err(LensError::TooFewClasses(1)));
        assert_eq!(
            select_classes(&c, &[0, 5]),
            Err(LensError::UnknownClass { index: 5, k: 3 })
        );
        assert_eq!(select_classes(&c, &[1, 1]), Err(LensError::DuplicateClass(1)));
    }

    #[test]
    fn selection_changes_accuracy() {
        // full: trace 4 of 6; selecting {0,1} drops the (2,0) confusion
        let c = cube_from(&[(0, &[&[1, 1, 0], &[0, 2, 0], &[1, 0, 1]])]);
        let full = accuracy_series(&c).unwrap().values[0].unwrap();
        let sub = accuracy_series(&select_classes(&c, &[0, 1]).unwrap()).unwrap().values[0].unwrap();
        assert!((full - 4.0 / 6.0).abs() < 1e-12);
        assert!((sub - 0.75).abs() < 1e-12);
    }

    #[test]
    fn aggregation() {
        let c = example();
        let mapping = SuperclassMapping::new(
            vec![
                Superclass {
                    name: "A".into(),
                    members: vec![0, 1],
                },
                Superclass {
                    name: "B".into(),
                    members: vec![2],
                },
            ],
            3,
        )
        .unwrap();
        let a = aggregate_superclasses(&c, &mapping).unwrap();
        assert_eq!(a.epochs()[0].counts.to_rows(), vec![vec![4, 0], vec![0, 1]]);
        assert_eq!(a.alphabet().labels(), &["A".to_string(), "B".to_string()]);

        let id = SuperclassMapping::singletons(c.alphabet());
        assert_eq!(aggregate_superclasses(&c, &id).unwrap(), c);
    }

    #[test]
    fn mapping_validation() {
        let g = |name: &str, members: &[usize]| Superclass {
            name: name.into(),
            members: members.to_vec(),
        };
        assert!(SuperclassMapping::new(vec![g("A", &[0, 1, 2])], 3).is_err());
        assert!(SuperclassMapping::new(vec![g("A", &[0, 1]), g("B", &[1, 2])], 3).is_err());
        assert!(SuperclassMapping::new(vec![g("A", &[0]), g("B", &[1])], 3).is_err());
        assert!(SuperclassMapping::new(vec![g("A", &[0]), g("A", &[1, 2])], 3).is_err());
        assert!(SuperclassMapping::new(vec![g("A", &[0, 1]), g("B", &[7])], 3).is_err());

        let ab = ClassAlphabet::new(["cat", "dog", "car"]).unwrap();
        let m = SuperclassMapping::from_json(
            br#"[{"name":"animal","members":["cat","dog"]},{"name":"vehicle","members":["car"]}]"#,
            &ab,
        )
        .unwrap();
        assert_eq!(m.group_of(2), 1);
        assert_eq!(
            SuperclassMapping::from_json(br#"[{"name":"x","members":["bus"]}]"#, &ab),
            Err(LensError::UnknownLabel("bus".into()))
        );
    }

    #[test]
    fn slicing() {
        let c = counting(50);
        let s = slice_iterations(&c, 0, 42).unwrap();
        assert_eq!(s.epochs().len(), 43);
        assert_eq!(slice_iterations(&c, 0, 49).unwrap(), c);
        assert_eq!(
            slice_iterations(&c, 100, 200),
            Err(LensError::EmptySlice { from: 100, to: 200 })
        );
        assert_eq!(
            slice_iterations(&c, 5, 4),
            Err(LensError::InvalidRange { from: 5, to: 4 })
        );
    }

    #[test]
    fn f1_ranking() {
        // F1 per class of the example: [2/3, 0.8, 1.0]
        let c = example();
        assert_eq!(rank_classes_by_final_f1(&c, 2, true).unwrap(), vec![0, 1]);
        assert_eq!(rank_classes_by_final_f1(&c, 2, false).unwrap(), vec![2, 1]);
        assert_eq!(rank_classes_by_final_f1(&c, 10, true).unwrap(), vec![0, 1, 2]);
        let flat = cube_from(&[(0, &[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]])]);
        assert_eq!(rank_classes_by_final_f1(&flat, 2, true).unwrap(), vec![0, 1]);
        assert!(rank_classes_by_final_f1(&c, 1, true).is_err());
    }

    #[test]
    fn f1_ranking_absent_is_worst() {
        // class 2 absent at the last epoch
        let c = cube_from(&[
            (0, &[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]),
            (3, &[&[1, 1, 0], &[0, 2, 0], &[0, 0, 0]]),
        ]);
        assert_eq!(rank_classes_by_final_f1(&c, 2, true).unwrap(), vec![2, 0]);
        assert_eq!(rank_classes_by_final_f1(&c, 3, false).unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn cell_ranking() {
        let r = rank_cells_by_final_confusion(&example(), 1).unwrap();
        assert_eq!(
            r.cells,
            vec![RankedCell {
                row: 0,
                col: 1,
                count: 1
            }]
        );
        assert_eq!(r.induced_classes, vec![0, 1]);

        let diag = cube_from(&[(0, &[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]])]);
        let r = rank_cells_by_final_confusion(&diag, 3).unwrap();
        let pairs: Vec<_> = r.cells.iter().map(|c| (c.row, c.col, c.count)).collect();
        assert_eq!(pairs, vec![(0, 1, 0), (0, 2, 0), (1, 0, 0)]);
        assert_eq!(rank_cells_by_final_confusion(&diag, 100).unwrap().cells.len(), 6);
        assert!(rank_cells_by_final_confusion(&diag, 0).is_err());
    }

    #[test]
    fn lens_validation_and_warnings() {
        let mut lens = ViewLens {
            classes: ClassProjection::Subset(vec![0]),
            ..ViewLens::default()
        };
        assert_eq!(lens.validate(3), Err(LensError::TooFewClasses(1)));
        lens.classes = ClassProjection::All;
        lens.range = Some(IterationRange { from: 0, to: 42 });
        lens.focus = Some(43);
        assert!(matches!(lens.validate(3), Err(LensError::FocusOutOfRange { .. })));
        lens.focus = Some(22);
        assert_eq!(lens.apply(&counting(50)).unwrap().epochs().len(), 43);
        assert!(lens.warnings(20).is_empty());
        assert_eq!(lens.warnings(100).len(), 1);
    }
}
