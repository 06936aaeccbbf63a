use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use crate::data_io::{InteractionDataset, Split};
use crate::entity::Side;
use crate::error::{Error, Result};
use crate::numkit::RandomStream;

/// Share of training pairs moved to validation by the entity-based splits.
pub const VALID_SHARE: f64 = 0.1;

fn entity(ds: &InteractionDataset, i: usize, side: Side) -> &str {
    match side {
        Side::Drug => &ds.pairs[i].drug,
        Side::Protein => &ds.pairs[i].protein,
    }
}

/// Moves a stratified `VALID_SHARE` of the `Train` rows to `Valid`.
fn carve_validation(
    ds: &InteractionDataset,
    split: &mut [Option<Split>],
    stream: &mut RandomStream,
) {
    for label in [1u8, 0] {
        let mut rows: Vec<usize> = (0..ds.len())
            .filter(|&i| split[i] == Some(Split::Train) && ds.pairs[i].label == label)
            .collect();
        stream.shuffle(&mut rows);
        let take = (VALID_SHARE * rows.len() as f64).round() as usize;
        for &i in rows.iter().take(take) {
            split[i] = Some(Split::Valid);
        }
    }
}

/// Entity-disjoint split: a `visible_fraction` share of the entities on
/// `side` (among those in `ds`) are visible. Pairs with a visible entity
/// train (a small stratified share validates), the rest form the test set.
pub fn cold_start_split(
    ds: &InteractionDataset,
    side: Side,
    visible_fraction: f64,
    stream: &mut RandomStream,
) -> Result<InteractionDataset> {
    if !(visible_fraction > 0.0 && visible_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "visible fraction must lie in (0,1), got {visible_fraction}"
        )));
    }
    let entities: Vec<&str> = (0..ds.len())
        .map(|i| entity(ds, i, side))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut order = entities.clone();
    stream.shuffle(&mut order);
    let n_visible = (visible_fraction * entities.len() as f64).round() as usize;
    let visible: HashSet<&str> = order[..n_visible.min(order.len())]
        .iter()
        .copied()
        .collect();

    let mut split: Vec<Option<Split>> = (0..ds.len())
        .map(|i| {
            Some(if visible.contains(entity(ds, i, side)) {
                Split::Train
            } else {
                Split::Test
            })
        })
        .collect();
    carve_validation(ds, &mut split, stream);

    let out = InteractionDataset::with_splits(ds.pairs.clone(), split, stream.seed())?;
    let train_rows = out.indices(Split::Train);
    let test_rows = out.indices(Split::Test);
    if train_rows.is_empty() || test_rows.is_empty() {
        return Err(Error::Input(format!(
            "cold-start split at fraction {visible_fraction} over {} {side}s leaves {} training and {} test pairs",
            entities.len(),
            train_rows.len(),
            test_rows.len()
        )));
    }
    let seen: HashSet<&str> = train_rows
        .iter()
        .chain(&out.indices(Split::Valid))
        .map(|&i| entity(&out, i, side))
        .collect();
    if let Some(&leak) = test_rows
        .iter()
        .find(|&&i| seen.contains(entity(&out, i, side)))
    {
        return Err(Error::Contract(format!(
            "{side} `{}` appears in both training and test pairs",
            entity(&out, leak, side)
        )));
    }
    Ok(out)
}

/// Every pair touching a holdout entity goes to the evaluation set; the rest
/// trains (with a stratified validation share).
pub fn case_study_split(
    ds: &InteractionDataset,
    holdout: &[String],
    stream: &mut RandomStream,
) -> Result<(InteractionDataset, InteractionDataset)> {
    if holdout.is_empty() {
        return Err(Error::Input(
            "case study needs at least one holdout entity".into(),
        ));
    }
    let known: HashSet<&str> = ds
        .pairs
        .iter()
        .flat_map(|p| [p.drug.as_str(), p.protein.as_str()])
        .collect();
    if let Some(missing) = holdout.iter().find(|h| !known.contains(h.as_str())) {
        return Err(Error::Input(format!(
            "holdout entity `{missing}` has no pairs in the dataset"
        )));
    }
    let held: HashSet<&str> = holdout.iter().map(String::as_str).collect();
    let (mut train_pairs, mut eval_pairs) = (Vec::new(), Vec::new());
    for p in &ds.pairs {
        if held.contains(p.drug.as_str()) || held.contains(p.protein.as_str()) {
            eval_pairs.push(p.clone());
        } else {
            train_pairs.push(p.clone());
        }
    }
    if train_pairs.is_empty() {
        return Err(Error::Input(
            "case-study holdout leaves no training pairs".into(),
        ));
    }
    let mut split = vec![Some(Split::Train); train_pairs.len()];
    let train = InteractionDataset::with_splits(train_pairs, split.clone(), stream.seed())?;
    carve_validation(&train, &mut split, stream);
    let train = InteractionDataset::with_splits(train.pairs, split, stream.seed())?;
    let n_eval = eval_pairs.len();
    let eval = InteractionDataset::with_splits(
        eval_pairs,
        vec![Some(Split::Test); n_eval],
        stream.seed(),
    )?;
    Ok((train, eval))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseStudyRow {
    pub drug: String,
    pub protein: String,
    pub ground_truth: u8,
    pub prediction: u8,
    pub correct: bool,
}

pub fn case_study_report(
    eval: &InteractionDataset,
    rows: &[usize],
    scores: &[f64],
    threshold: f64,
) -> Result<Vec<CaseStudyRow>> {
    if rows.len() != scores.len() {
        return Err(Error::Shape {
            op: "case_study_report",
            left: (rows.len(), 1),
            right: (scores.len(), 1),
        });
    }
    Ok(rows
        .iter()
        .zip(scores)
        .map(|(&i, &s)| {
            let p = &eval.pairs[i];
            let prediction = u8::from(s >= threshold);
            CaseStudyRow {
                drug: p.drug.clone(),
                protein: p.protein.clone(),
                ground_truth: p.label,
                prediction,
                correct: prediction == p.label,
            }
        })
        .collect())
}

pub fn write_case_study(path: &Path, rows: &[CaseStudyRow]) -> Result<()> {
    let mut text = String::from("drug_id\tprotein_id\tground_truth\tprediction\tcorrectness\n");
    for r in rows {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            r.drug,
            r.protein,
            r.ground_truth,
            r.prediction,
            if r.correct { "TRUE" } else { "FALSE" }
        ));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
