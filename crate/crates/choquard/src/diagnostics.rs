//! Barycenters, solution-class deduplication, localization checks, and the
//! multiplicity verdict.

use crate::error::{Error, Result};
use crate::grid::{in_omega_r_plus, DomainSpec, Field};
use crate::solver::SolutionRecord;

/// Gradient-energy barycenter β(u) = ∫ x |∇u|² / ∫ |∇u|².
///
/// The discrete energy density is accumulated on nodes: each lattice edge
/// splits its squared difference between its two masked endpoints (all of it
/// to one endpoint when the other is exterior). Node-supported weights make
/// β exactly translation covariant and keep it inside the convex hull of the
/// masked nodes.
pub fn barycenter(u: &Field) -> Result<Vec<f64>> {
    let g = u.grid();
    let vals = u.values();
    let n = g.n();
    let mut total = 0.0f64;
    let mut moment = vec![0.0f64; n];
    for &i in g.masked_nodes() {
        let i = i as usize;
        let ui = vals[i];
        let mut w = 0.0f64;
        for a in 0..n {
            let s = g.stride(a);
            let fwd = vals[i + s] - ui;
            w += if g.mask()[i + s] { 0.5 } else { 1.0 } * fwd * fwd;
            let bwd = ui - vals[i - s];
            w += if g.mask()[i - s] { 0.5 } else { 1.0 } * bwd * bwd;
        }
        if w > 0.0 {
            total += w;
            for a in 0..n {
                moment[a] += w * g.coord(i, a);
            }
        }
    }
    if !(total > 0.0) {
        return Err(Error::ZeroField);
    }
    Ok(moment.into_iter().map(|m| m / total).collect())
}

/// One deduplicated solution class.
#[derive(Debug, Clone)]
pub struct ClassSummary {
    pub representative: SolutionRecord,
    pub member_count: usize,
    /// Indices into the record list passed to [`dedup`] (converged records only).
    pub member_indices: Vec<usize>,
    pub barycenter: Vec<f64>,
    pub in_omega_r_plus: bool,
}

fn find(parent: &mut [usize], mut k: usize) -> usize {
    while parent[k] != k {
        parent[k] = parent[parent[k]];
        k = parent[k];
    }
    k
}

/// Union-find grouping: two records coincide when their energies agree to
/// `energy_rtol` relative and their barycenters sit within `bary_dist`
/// (absolute length). Classes come back sorted by representative energy.
pub fn dedup(
    records: &[SolutionRecord],
    spec: &DomainSpec,
    energy_rtol: f64,
    bary_dist: f64,
) -> Vec<ClassSummary> {
    let converged: Vec<(usize, &SolutionRecord)> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.converged)
        .collect();
    let m = converged.len();
    let mut parent: Vec<usize> = (0..m).collect();
    for i in 0..m {
        for j in i + 1..m {
            let (a, b) = (converged[i].1, converged[j].1);
            let scale = 0.5 * (a.energy.abs() + b.energy.abs());
            let close_energy = (a.energy - b.energy).abs() <= energy_rtol * scale;
            let d: f64 = a
                .barycenter
                .iter()
                .zip(&b.barycenter)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            if close_energy && d < bary_dist {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); m];
    for k in 0..m {
        let root = find(&mut parent, k);
        groups[root].push(k);
    }
    let mut classes: Vec<ClassSummary> = groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|members| {
            let rep = members
                .iter()
                .copied()
                .min_by(|&a, &b| converged[a].1.energy.total_cmp(&converged[b].1.energy))
                .unwrap();
            let rep = converged[rep].1.clone();
            let bary = rep.barycenter.clone();
            let inside = in_omega_r_plus(spec, &bary);
            ClassSummary {
                representative: rep,
                member_count: members.len(),
                member_indices: members.iter().map(|&k| converged[k].0).collect(),
                barycenter: bary,
                in_omega_r_plus: inside,
            }
        })
        .collect();
    classes.sort_by(|a, b| a.representative.energy.total_cmp(&b.representative.energy));
    classes
}

/// Outcome of the barycenter localization test.
#[derive(Debug, Clone)]
pub struct LocalizationReport {
    /// Indices of classes inside the energy window m_ε + δ.
    pub checked: Vec<usize>,
    /// Checked classes whose barycenter escaped Ω_r^+.
    pub violations: Vec<usize>,
}

impl LocalizationReport {
    pub fn all_localized(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Every low-energy class (energy < m_ε + δ) must have its barycenter in
/// Ω_r^+; violations are listed, not panicked on.
pub fn barycenter_localization_check(
    classes: &[ClassSummary],
    spec: &DomainSpec,
    m_eps: f64,
    delta: f64,
) -> LocalizationReport {
    let mut checked = Vec::new();
    let mut violations = Vec::new();
    for (k, class) in classes.iter().enumerate() {
        if class.representative.energy < m_eps + delta {
            checked.push(k);
            if !in_omega_r_plus(spec, &class.barycenter) {
                violations.push(k);
            }
        }
    }
    LocalizationReport { checked, violations }
}

/// Multiplicity verdict against the declared topological count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Found at least as many low-energy classes as the declared category.
    Pass { low_energy_classes: usize, category: u32 },
    /// Numerics may miss solutions; a shortfall is inconclusive, never a
    /// refutation.
    Inconclusive {
        low_energy_classes: usize,
        category: u32,
        advice: String,
    },
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }

    pub fn label(&self) -> String {
        match self {
            Verdict::Pass {
                low_energy_classes,
                category,
            } => format!("PASS ({low_energy_classes} low-energy classes >= category {category})"),
            Verdict::Inconclusive {
                low_energy_classes,
                category,
                advice,
            } => format!(
                "INCONCLUSIVE ({low_energy_classes} low-energy classes < category {category}; {advice})"
            ),
        }
    }
}

pub fn multiplicity_verdict(
    classes: &[ClassSummary],
    spec: &DomainSpec,
    m_eps: f64,
    delta: f64,
) -> Verdict {
    let low = classes
        .iter()
        .filter(|c| c.representative.energy < m_eps + delta)
        .count();
    let category = spec.declared_category();
    if low >= category as usize {
        Verdict::Pass {
            low_energy_classes: low,
            category,
        }
    } else {
        Verdict::Inconclusive {
            low_energy_classes: low,
            category,
            advice: "try more seeds, a finer grid, or a smaller eps".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubbles::seed_bubble;
    use crate::grid::{build_grid, Field};
    use crate::solver::{Classification, SeedOrigin};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn disk_spec(r: f64) -> DomainSpec {
        DomainSpec::ball(&[0.0, 0.0], 1.0, Some(r)).unwrap()
    }

    fn record(energy: f64, bary: &[f64], grid: &Arc<crate::grid::Grid>) -> SolutionRecord {
        SolutionRecord {
            field: Field::zeros(grid.clone()),
            energy,
            norm_lambda_sq: 1.0,
            barycenter: bary.to_vec(),
            eps: 0.4,
            iterations: 1,
            final_grad_norm: 1e-9,
            seed_origin: SeedOrigin::Point(bary.to_vec()),
            classification: Classification::LowEnergy,
            converged: true,
        }
    }

    #[test]
    fn barycenter_of_symmetric_field_is_the_center() {
        let spec = disk_spec(0.3);
        let grid = build_grid(&spec, 32).unwrap();
        let u = seed_bubble(&grid, &spec, &[0.0, 0.0], 8.0).unwrap();
        let b = barycenter(&u).unwrap();
        assert!(b[0].abs() < 1e-10 && b[1].abs() < 1e-10, "{b:?}");
    }

    #[test]
    fn barycenter_translation_covariance() {
        // Shift the field by exact lattice vectors: beta moves with it.
        let spec = DomainSpec::cuboid(&[0.0, 0.0], &[1.0, 1.0], None).unwrap();
        let grid = build_grid(&spec, 16).unwrap();
        let bump = |x: &[f64], c: &[f64]| {
            let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
            (-30.0 * d2).exp()
        };
        let h = grid.h();
        let u = Field::from_fn(grid.clone(), |x| bump(x, &[0.1, -0.2]));
        let v = Field::from_fn(grid.clone(), |x| bump(&[x[0] - 3.0 * h, x[1] - h], &[0.1, -0.2]));
        let bu = barycenter(&u).unwrap();
        let bv = barycenter(&v).unwrap();
        assert!((bv[0] - bu[0] - 3.0 * h).abs() < 1e-10);
        assert!((bv[1] - bu[1] - h).abs() < 1e-10);
    }

    #[test]
    fn barycenter_tracks_concentrated_seeds() {
        let spec = disk_spec(0.25);
        let grid = build_grid(&spec, 64).unwrap();
        let x0 = [0.31, -0.42];
        for r_scale in [8.0, 16.0] {
            let u = seed_bubble(&grid, &spec, &x0, r_scale).unwrap();
            let b = barycenter(&u).unwrap();
            let d = ((b[0] - x0[0]).powi(2) + (b[1] - x0[1]).powi(2)).sqrt();
            assert!(d < 2.0 * grid.h(), "R={r_scale}: |beta - x0| = {d}");
        }
    }

    #[test]
    fn barycenter_scale_invariance_and_hull() {
        let spec = disk_spec(0.3);
        let grid = build_grid(&spec, 24).unwrap();
        let u = Field::from_fn(grid.clone(), |x| (5.0 * x[0]).sin() + x[1]);
        let b1 = barycenter(&u).unwrap();
        let b2 = barycenter(&u.scale(-7.5)).unwrap();
        assert!((b1[0] - b2[0]).abs() < 1e-12 && (b1[1] - b2[1]).abs() < 1e-12);
        // Inside the bounding box of the masked nodes.
        for a in 0..2 {
            let mut lo = f64::MAX;
            let mut hi = f64::MIN;
            for &i in grid.masked_nodes() {
                let c = grid.coord(i as usize, a);
                lo = lo.min(c);
                hi = hi.max(c);
            }
            assert!(b1[a] >= lo && b1[a] <= hi);
        }
        assert!(barycenter(&Field::zeros(grid)).is_err());
    }

    #[test]
    fn dedup_merges_and_separates() {
        let spec = disk_spec(0.2);
        let grid = build_grid(&spec, 16).unwrap();
        let h = grid.h();
        let a = record(1.0, &[0.0, 0.0], &grid);
        let b = record(1.0 + 1e-9, &[0.5 * h, 0.0], &grid);
        let classes = dedup(&[a.clone(), b.clone()], &spec, 1e-3, 6.0 * h);
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].member_count, 2);
        assert_eq!(classes[0].member_indices, vec![0, 1]);

        // Same energy, far-apart barycenters: two classes.
        let c = record(1.0, &[0.6, 0.0], &grid);
        let classes = dedup(&[a.clone(), c], &spec, 1e-3, 6.0 * h);
        assert_eq!(classes.len(), 2);

        // Unconverged records are dropped from classes.
        let mut d = record(0.9, &[0.0, 0.1], &grid);
        d.converged = false;
        let classes = dedup(&[a, d], &spec, 1e-3, 6.0 * h);
        assert_eq!(classes.len(), 1);
    }

    #[test]
    fn localization_flags_translated_field() {
        let spec = disk_spec(0.2);
        let grid = build_grid(&spec, 16).unwrap();
        let inside = record(1.0, &[0.1, 0.0], &grid);
        // Negative control: a barycenter forced outside Omega_r^+.
        let outside = record(1.01, &[1.5, 0.0], &grid);
        let classes = dedup(&[inside, outside], &spec, 1e-6, 0.01);
        assert_eq!(classes.len(), 2);
        let report = barycenter_localization_check(&classes, &spec, 1.0, 0.1);
        assert_eq!(report.checked.len(), 2);
        assert_eq!(report.violations.len(), 1);
        assert!(!report.all_localized());
        let flagged = &classes[report.violations[0]];
        assert!(!flagged.in_omega_r_plus);
    }

    #[test]
    fn verdict_logic() {
        let spec = DomainSpec::annulus(&[0.0, 0.0], 0.4, 1.0, Some(0.1)).unwrap();
        let grid = build_grid(&spec, 32).unwrap();
        let a = record(1.0, &[0.7, 0.0], &grid);
        let b = record(1.0, &[-0.7, 0.0], &grid);
        let two = dedup(&[a.clone(), b], &spec, 1e-3, 0.05);
        let v = multiplicity_verdict(&two, &spec, 1.0, 0.1);
        assert!(v.is_pass(), "{}", v.label());

        let one = dedup(&[a], &spec, 1e-3, 0.05);
        let v = multiplicity_verdict(&one, &spec, 1.0, 0.1);
        assert!(!v.is_pass());
        assert!(v.label().contains("INCONCLUSIVE"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn dedup_is_permutation_stable(perm in proptest::sample::select(vec![
            vec![0usize, 1, 2, 3], vec![3, 2, 1, 0], vec![2, 0, 3, 1], vec![1, 3, 0, 2],
        ])) {
            let spec = disk_spec(0.2);
            let grid = build_grid(&spec, 16).unwrap();
            let base = [
                record(1.00, &[0.5, 0.0], &grid),
                record(1.00, &[-0.5, 0.0], &grid),
                record(1.0000001, &[0.5 + 0.001, 0.0], &grid),
                record(2.00, &[0.0, 0.0], &grid),
            ];
            let shuffled: Vec<_> = perm.iter().map(|&k| base[k].clone()).collect();
            let reference = dedup(&base, &spec, 1e-3, 0.05);
            let got = dedup(&shuffled, &spec, 1e-3, 0.05);
            prop_assert_eq!(reference.len(), got.len());
            // Partition: every converged record in exactly one class.
            let mut seen = vec![false; shuffled.len()];
            for class in &got {
                for &k in &class.member_indices {
                    prop_assert!(!seen[k]);
                    seen[k] = true;
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
            // Class energies match up after sorting.
            for (r, g) in reference.iter().zip(&got) {
                prop_assert!((r.representative.energy - g.representative.energy).abs() < 1e-12);
            }
        }
    }
}
