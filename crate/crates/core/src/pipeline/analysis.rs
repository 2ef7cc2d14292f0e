use serde::{Deserialize, Serialize};

use super::model::{Batch, ModelBundle};
use super::RunConfig;
use crate::flowcore::{euler_endpoint, euler_map, straightness_ratio, Straightness};
use crate::metrics::{cycle_error, gap_report, GapReport};
use crate::modality::Modality;
use crate::numkit::Matrix;
use crate::synthdata::Sample;
use crate::Result;

/// Encoded features `X_m` of every sample, indexed by [`Modality::index`].
pub fn encode_split(bundle: &ModelBundle, samples: &[Sample]) -> Result<[Matrix; 3]> {
    let batch = Batch::from_samples(samples)?;
    let [a, v, l] = Modality::ALL.map(|m| bundle.encoder(m).predict(&batch.u[m.index()]));
    Ok([a?, v?, l?])
}

/// Modality gap before and after transport, per source modality (a, v).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    /// `X_m` against `X_l`.
    pub before: [GapReport; 2],
    /// `X_{m,l}` against `X_l`.
    pub after: [GapReport; 2],
    /// Error of mapping forward and then back with the backward flow.
    pub cycle_error: [f64; 2],
    pub straightness: [Straightness; 2],
}

pub fn alignment_report(bundle: &ModelBundle, samples: &[Sample], cfg: &RunConfig) -> Result<AlignmentReport> {
    let x = encode_split(bundle, samples)?;
    let x_l = &x[Modality::Language.index()];
    let mut before = Vec::with_capacity(2);
    let mut after = Vec::with_capacity(2);
    let mut cycle = [0.0; 2];
    let mut straight = Vec::with_capacity(2);
    for (slot, m) in Modality::SOURCES.into_iter().enumerate() {
        let x_m = &x[m.index()];
        let trace = euler_map(bundle.forward_drift(m), x_m, cfg.euler_steps)?;
        let mapped = trace.endpoint();
        let back = euler_endpoint(bundle.backward_drift(m), mapped, cfg.euler_steps)?;
        before.push(gap_report(x_m, x_l)?);
        after.push(gap_report(mapped, x_l)?);
        cycle[slot] = cycle_error(x_m, &back)?;
        straight.push(straightness_ratio(&trace.states)?);
    }
    Ok(AlignmentReport {
        before: [before[0], before[1]],
        after: [after[0], after[1]],
        cycle_error: cycle,
        straightness: [straight[0], straight[1]],
    })
}
