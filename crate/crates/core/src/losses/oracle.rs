//! Reference contrastive losses written as literal loops over explicitly
//! labelled views, in f64. Used only to check the batched versions.

use super::{info_nce, sup_single};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewKind {
    /// An augmented agent view; the field names its source state.
    Agent(usize),
    Expert,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledView {
    pub embedding: Vec<f64>,
    pub kind: ViewKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleLosses {
    pub unsup: f64,
    pub sup: f64,
    pub c_sup: f64,
}

fn sibling(views: &[LabeledView], i: usize) -> Result<usize> {
    let ViewKind::Agent(src) = views[i].kind else {
        unreachable!("only agent views have siblings");
    };
    let found: Vec<usize> = (0..views.len())
        .filter(|&j| j != i && views[j].kind == ViewKind::Agent(src))
        .collect();
    match found.as_slice() {
        [j] => Ok(*j),
        _ => Err(Error::DegenerateInput(format!(
            "agent source {src} must have exactly two views"
        ))),
    }
}

/// All three contrastive losses from labelled (not necessarily unit-norm)
/// embeddings. Views may appear in any order. The supervised loss is NaN
/// when fewer than two expert views are present.
pub fn oracle_contrastive(views: &[LabeledView], alpha: f64, tau: f64) -> Result<OracleLosses> {
    let agents: Vec<usize> = (0..views.len())
        .filter(|&i| matches!(views[i].kind, ViewKind::Agent(_)))
        .collect();
    let experts: Vec<usize> = (0..views.len())
        .filter(|&i| views[i].kind == ViewKind::Expert)
        .collect();
    let emb = |i: usize| views[i].embedding.as_slice();

    let mut unsup = 0.0;
    for &i in &agents {
        let p = sibling(views, i)?;
        let contrast: Vec<&[f64]> = agents.iter().filter(|&&j| j != i).map(|&j| emb(j)).collect();
        unsup += info_nce(emb(i), emb(p), &contrast, tau)?;
    }
    unsup /= agents.len() as f64;

    let mut sup = 0.0;
    if experts.len() >= 2 {
        for &i in &experts {
            let positives: Vec<&[f64]> = experts.iter().filter(|&&j| j != i).map(|&j| emb(j)).collect();
            let contrast: Vec<&[f64]> = (0..views.len()).filter(|&j| j != i).map(emb).collect();
            sup += sup_single(emb(i), &positives, &contrast, tau)?;
        }
        sup /= experts.len() as f64;
    } else {
        sup = f64::NAN;
    }

    let mut c_sup = 0.0;
    for &i in &agents {
        let p = sibling(views, i)?;
        let contrast: Vec<&[f64]> = (0..views.len()).filter(|&j| j != i).map(emb).collect();
        let mut positives: Vec<&[f64]> = experts.iter().map(|&j| emb(j)).collect();
        positives.push(emb(p));
        let calibrated = sup_single(emb(i), &positives, &contrast, tau)?;
        let paired = info_nce(emb(i), emb(p), &contrast, tau)?;
        c_sup += alpha * calibrated + (1.0 - alpha) * paired;
    }
    c_sup /= agents.len() as f64;

    Ok(OracleLosses { unsup, sup, c_sup })
}

/// Labels for the batched row layout: `2n` paired agent views, then `n`
/// expert views.
pub fn label_batch(z: &[f64], n: usize, dim: usize) -> Vec<LabeledView> {
    z.chunks(dim)
        .enumerate()
        .map(|(i, e)| LabeledView {
            embedding: e.to_vec(),
            kind: if i < 2 * n { ViewKind::Agent(i / 2) } else { ViewKind::Expert },
        })
        .collect()
}
