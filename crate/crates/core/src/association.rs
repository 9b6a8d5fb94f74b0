//! Pilot assignment, master-AP selection and serving clusters.
//!
//! The procedure is deterministic given the gain matrix:
//!
//! 1. every UE picks its strongest AP as master;
//! 2. UEs are visited in decreasing order of their strongest gain and each
//!    takes the pilot with the least co-pilot gain at its master AP, among the
//!    pilots not already held by another UE anchored at the same AP;
//! 3. in the cell-free scenario every AP additionally serves, for each pilot,
//!    the strongest UE it hears on that pilot. The small-cell and massive-MIMO
//!    scenarios keep only the master AP.
//!
//! Ties are always broken towards the lowest index.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Deployment scenario; only the cluster-size policy depends on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    CellFree,
    SmallCell,
    MassiveMimo,
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioId::CellFree => "cell_free",
            ScenarioId::SmallCell => "small_cell",
            ScenarioId::MassiveMimo => "massive_mimo",
        })
    }
}

/// Who serves whom, and on which pilot.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub num_pilots: usize,
    pub antennas: usize,
    /// Pilot index of each UE.
    pub pilot_of: Vec<usize>,
    /// `M_k`, sorted ascending.
    pub serving_aps: Vec<Vec<usize>>,
    /// `D_l`, sorted ascending.
    pub served_ues: Vec<Vec<usize>>,
    pub master_ap: Vec<usize>,
    /// `K x L` selection matrix `A`.
    pub selection: DMatrix<u8>,
    /// Diagonal of `D_kl`, row-major over `(k, l)`.
    pub antenna_masks: Vec<Vec<bool>>,
}

impl ClusterAssignment {
    pub fn num_ues(&self) -> usize {
        self.pilot_of.len()
    }

    pub fn num_aps(&self) -> usize {
        self.served_ues.len()
    }

    pub fn is_served(&self, k: usize, l: usize) -> bool {
        self.selection[(k, l)] == 1
    }

    pub fn antenna_mask(&self, k: usize, l: usize) -> &[bool] {
        &self.antenna_masks[k * self.num_aps() + l]
    }

    /// UEs sharing pilot `t`.
    pub fn co_pilot_set(&self, t: usize) -> Vec<usize> {
        (0..self.num_ues()).filter(|&k| self.pilot_of[k] == t).collect()
    }

    /// Builds an assignment from explicit pilots and clusters with whole-AP
    /// antenna masks. `serving_aps[k][0]` is taken as the master AP.
    pub fn from_clusters(
        num_pilots: usize,
        antennas: usize,
        num_aps: usize,
        pilot_of: Vec<usize>,
        serving_aps: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if pilot_of.len() != serving_aps.len() {
            return Err(Error::InvalidInput("pilot_of and serving_aps differ in length".into()));
        }
        if let Some(&t) = pilot_of.iter().find(|&&t| t >= num_pilots) {
            return Err(Error::InvalidInput(format!("pilot index {t} out of range")));
        }
        let k_count = pilot_of.len();
        let mut selection = DMatrix::zeros(k_count, num_aps);
        let mut master_ap = Vec::with_capacity(k_count);
        for (k, aps) in serving_aps.iter().enumerate() {
            let first = *aps.first().ok_or_else(|| Error::InvalidInput(format!("UE {k} has no serving AP")))?;
            master_ap.push(first);
            for &l in aps {
                if l >= num_aps {
                    return Err(Error::InvalidInput(format!("AP index {l} out of range")));
                }
                selection[(k, l)] = 1u8;
            }
        }
        Ok(Self::from_selection(num_pilots, antennas, pilot_of, master_ap, selection))
    }

    fn from_selection(
        num_pilots: usize,
        antennas: usize,
        pilot_of: Vec<usize>,
        master_ap: Vec<usize>,
        selection: DMatrix<u8>,
    ) -> Self {
        let (k_count, l_count) = selection.shape();
        let serving_aps = (0..k_count).map(|k| (0..l_count).filter(|&l| selection[(k, l)] == 1).collect()).collect();
        let served_ues = (0..l_count).map(|l| (0..k_count).filter(|&k| selection[(k, l)] == 1).collect()).collect();
        let antenna_masks = (0..k_count * l_count)
            .map(|i| vec![selection[(i / l_count, i % l_count)] == 1; antennas])
            .collect();
        Self { num_pilots, antennas, pilot_of, serving_aps, served_ues, master_ap, selection, antenna_masks }
    }
}

fn argmax_row<T: Real>(beta: &DMatrix<T>, k: usize) -> usize {
    let mut best = 0;
    for l in 1..beta.ncols() {
        if beta[(k, l)] > beta[(k, best)] {
            best = l;
        }
    }
    best
}

/// Runs the pilot and cluster procedure described in the module docs.
pub fn assign_pilots_and_clusters<T: Real>(
    beta: &DMatrix<T>,
    antennas: usize,
    tau_p: usize,
    scenario: ScenarioId,
) -> Result<ClusterAssignment> {
    if tau_p < 1 {
        return Err(Error::InvalidInput("tau_p must be at least 1".into()));
    }
    if let Some(b) = beta.iter().find(|b| !(**b > T::zero())) {
        return Err(Error::InvalidInput(format!("large-scale gains must be positive, found {b}")));
    }
    let (k_count, l_count) = beta.shape();
    if k_count == 0 || l_count == 0 {
        return Err(Error::InvalidInput("empty gain matrix".into()));
    }

    let strongest: Vec<usize> = (0..k_count).map(|k| argmax_row(beta, k)).collect();
    let mut order: Vec<usize> = (0..k_count).collect();
    // stable sort keeps lower indices first on ties
    order.sort_by(|&a, &b| {
        beta[(b, strongest[b])].partial_cmp(&beta[(a, strongest[a])]).unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut pilot_of = vec![usize::MAX; k_count];
    let mut master_ap = vec![usize::MAX; k_count];
    // taken[l][t]: some UE anchored at AP l already holds pilot t
    let mut taken = vec![vec![false; tau_p]; l_count];

    for &k in &order {
        let mut master = strongest[k];
        if scenario == ScenarioId::CellFree && taken[master].iter().all(|&x| x) {
            // anchor at the strongest AP that still has a free pilot
            let mut aps: Vec<usize> = (0..l_count).collect();
            aps.sort_by(|&a, &b| beta[(k, b)].partial_cmp(&beta[(k, a)]).unwrap_or(std::cmp::Ordering::Equal));
            master = *aps.iter().find(|&&l| taken[l].iter().any(|&x| !x)).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "cannot anchor UE {k}: every AP already uses all {tau_p} pilots (K > tau_p * L)"
                ))
            })?;
        }
        let any_free = taken[master].iter().any(|&x| !x);
        let mut best: Option<(usize, T)> = None;
        for t in 0..tau_p {
            if any_free && taken[master][t] {
                continue;
            }
            let interference = (0..k_count)
                .filter(|&i| pilot_of[i] == t)
                .fold(T::zero(), |acc, i| acc + beta[(i, master)]);
            if best.is_none_or(|(_, b)| interference < b) {
                best = Some((t, interference));
            }
        }
        let (t, _) = best.expect("tau_p >= 1");
        pilot_of[k] = t;
        master_ap[k] = master;
        taken[master][t] = true;
    }

    let mut selection = DMatrix::zeros(k_count, l_count);
    for k in 0..k_count {
        selection[(k, master_ap[k])] = 1u8;
    }
    if scenario == ScenarioId::CellFree {
        for l in 0..l_count {
            for t in 0..tau_p {
                if taken[l][t] {
                    continue;
                }
                let mut pick: Option<usize> = None;
                for k in (0..k_count).filter(|&k| pilot_of[k] == t) {
                    if pick.is_none_or(|p| beta[(k, l)] > beta[(p, l)]) {
                        pick = Some(k);
                    }
                }
                if let Some(k) = pick {
                    selection[(k, l)] = 1;
                }
            }
        }
    }

    Ok(ClusterAssignment::from_selection(tau_p, antennas, pilot_of, master_ap, selection))
}

/// `Lambda_k`: sum of the gains from UE `k` to the APs serving it.
pub fn effective_cluster_gain<T: Real>(beta: &DMatrix<T>, assignment: &ClusterAssignment, k: usize) -> Result<T> {
    let aps = &assignment.serving_aps[k];
    if aps.is_empty() {
        return Err(Error::InvalidInput(format!("UE {k} has an empty serving cluster")));
    }
    Ok(aps.iter().fold(T::zero(), |acc, &l| acc + beta[(k, l)]))
}

/// `Lambda_k` for every UE.
pub fn cluster_gains<T: Real>(beta: &DMatrix<T>, assignment: &ClusterAssignment) -> Result<Vec<T>> {
    (0..assignment.num_ues()).map(|k| effective_cluster_gain(beta, assignment, k)).collect()
}

/// Audit export: pilot map and selection matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSnapshot {
    pub num_pilots: usize,
    pub pilot_of: Vec<usize>,
    pub master_ap: Vec<usize>,
    pub selection: Vec<Vec<u8>>,
}

impl From<&ClusterAssignment> for AssignmentSnapshot {
    fn from(a: &ClusterAssignment) -> Self {
        Self {
            num_pilots: a.num_pilots,
            pilot_of: a.pilot_of.clone(),
            master_ap: a.master_ap.clone(),
            selection: (0..a.num_ues()).map(|k| (0..a.num_aps()).map(|l| a.selection[(k, l)]).collect()).collect(),
        }
    }
}
