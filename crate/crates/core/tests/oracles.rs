//! Quadrature and dense-matrix oracles for the stencils, the assembled pencils
//! and the banded eigensolver.

mod common;

use common::{
    dense_eigenvalues, gauss_laguerre, raw_pair, term_oracle, weight_oracle, AxisRule, DdRule,
};
use molion::algebra::{derive, ExchangeSector};
use molion::assembly::assemble;
use molion::eigensolver::{solve, Problem, SolveRequest};
use molion::sturmian::{stencil, ScaleParams, StencilKind};
use molion::systems::{reduced_masses, Species, SystemSpec};
use nalgebra::DMatrix;

#[test]
fn quadrature_rule_integrates_moments() {
    // int t^k e^{-t} dt = k!
    let (t, w) = gauss_laguerre(40);
    let mut fact = 1.0;
    for k in 0..60 {
        if k > 0 {
            fact *= k as f64;
        }
        let s: f64 = t
            .iter()
            .zip(&w)
            .map(|(t, w)| w * (-t).exp() * t.powi(k))
            .sum();
        assert!((s - fact).abs() <= 1e-12 * fact, "k={k}: {s} vs {fact}");
    }
}

#[test]
fn stencils_match_quadrature_up_to_200() {
    let nmax = 200;
    let rule = DdRule::new(210, nmax);
    let kinds = [
        (StencilKind::Mult, 0, false, false),
        (StencilKind::Deriv, 1, false, true),
        (StencilKind::DerivDeriv, 1, true, true),
    ];
    for (kind, kmin, dl, dr) in kinds {
        for k in kmin..=8u32 {
            let s = stencil(kind, k, 1.0, nmax + 1).unwrap();
            let h = s.half_bandwidth;
            let mut worst: f64 = 0.0;
            for m in 0..=nmax {
                for n in m.saturating_sub(h + 1)..=(m + h + 1).min(nmax) {
                    let (q, mag) = rule.integral(m, n, k, dl, dr);
                    let err = (s.get(m, n) - q).abs() / mag;
                    worst = worst.max(err);
                }
            }
            assert!(worst <= 1e-12, "{kind:?} k={k}: relative error {worst:.2e}");
        }
    }
}

#[test]
fn scaled_stencils_match_quadrature() {
    for scale in [0.35, 2.7, 14.0] {
        let rule = AxisRule::new(40, scale, 24);
        for (kind, dl, dr) in [
            (StencilKind::Mult, false, false),
            (StencilKind::Deriv, false, true),
            (StencilKind::DerivDeriv, true, true),
        ] {
            for k in 1..=6 {
                let s = stencil(kind, k, scale, 25).unwrap();
                for m in 0..25 {
                    for n in 0..25 {
                        let (q, mag) = rule.integral(m, n, k, dl, dr);
                        assert!(
                            (s.get(m, n) - q).abs() <= 1e-12 * mag,
                            "{kind:?} k={k} ({m},{n})"
                        );
                    }
                }
            }
        }
    }
}

fn assert_close(name: &str, got: &DMatrix<f64>, want: &DMatrix<f64>) {
    let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for i in 0..want.nrows() {
        for j in 0..want.ncols() {
            let d = (got[(i, j)] - want[(i, j)]).abs();
            assert!(
                d <= 1e-12 * scale.max(want[(i, j)].abs()),
                "{name} ({i},{j}): {} vs {} (scale {scale:.2e})",
                got[(i, j)],
                want[(i, j)]
            );
        }
    }
}

fn cases() -> Vec<(u32, bool, ExchangeSector)> {
    let mut v = Vec::new();
    for j in 0..=2 {
        v.push((j, false, ExchangeSector::None));
        v.push((j, true, ExchangeSector::Singlet));
        v.push((j, true, ExchangeSector::Triplet));
    }
    v
}

#[test]
fn assembled_pencils_match_term_quadrature() {
    for (j, homo, sector) in cases() {
        for (n, n_x) in [(2, 2), (3, 2)] {
            let ham = derive(j, homo, sector).unwrap();
            let p = assemble(&ham, n, n_x, ScaleParams::new(1.3, 0.8).unwrap(), "oracle").unwrap();
            let got = raw_pair(&p);
            let want = term_oracle(&p, &ham, false);
            for (k, name) in ["a_electron", "a_nuclear", "a_symbreak", "b"]
                .iter()
                .enumerate()
            {
                assert_close(&format!("J={j} {sector} N={n} {name}"), &got[k], &want[k]);
            }
            // the operator must be symmetric as a bilinear form, not just in storage
            for w in &want {
                assert_close(&format!("J={j} {sector} transpose"), &w.transpose(), w);
            }
        }
    }
}

#[test]
fn s_state_overlap_and_coulomb_match_physical_weights() {
    // r1 = (x+y)/2, r2 = (x+z)/2, R = (y+z)/2; B = r1 r2 R and the Coulomb
    // part of A is r1 r2 R (-1/r1 - 1/r2 + 1/R)
    let dists = |x: f64, y: f64, z: f64| ((x + y) / 2.0, (x + z) / 2.0, (y + z) / 2.0);
    for (homo, sector) in [
        (false, ExchangeSector::None),
        (true, ExchangeSector::Singlet),
        (true, ExchangeSector::Triplet),
    ] {
        let ham = derive(0, homo, sector).unwrap();
        let p = assemble(&ham, 3, 3, ScaleParams::new(1.1, 0.9).unwrap(), "oracle").unwrap();
        let got = raw_pair(&p);
        let b = weight_oracle(&p, |x, y, z| {
            let (r1, r2, r) = dists(x, y, z);
            r1 * r2 * r
        });
        assert_close(&format!("{sector} B"), &got[3], &b);
        let coulomb = weight_oracle(&p, |x, y, z| {
            let (r1, r2, r) = dists(x, y, z);
            -r2 * r - r1 * r + r1 * r2
        });
        let kinetic = &term_oracle(&p, &ham, true)[0];
        assert_close(
            &format!("{sector} A electron"),
            &got[0],
            &(kinetic + coulomb),
        );
    }
}

#[test]
fn sector_bases_are_orthonormal() {
    for (j, homo, sector) in cases() {
        let ham = derive(j, homo, sector).unwrap();
        let p = assemble(&ham, 4, 3, ScaleParams::new(1.0, 1.0).unwrap(), "oracle").unwrap();
        let gram = weight_oracle(&p, |_, _, _| 1.0);
        for i in 0..p.dim() {
            for k in 0..p.dim() {
                let same_block = p.basis.states[i].block == p.basis.states[k].block;
                let want = if i == k {
                    1.0
                } else if same_block {
                    0.0
                } else {
                    gram[(i, k)]
                };
                assert!(
                    (gram[(i, k)] - want).abs() < 1e-13,
                    "J={j} {sector} ({i},{k})"
                );
            }
        }
    }
}

#[test]
fn banded_lanczos_matches_dense_oracle() {
    let cases = [
        (Species::H2Plus, 0, 20, 12, 2.0, 14.0, 8),
        (Species::HDPlus, 0, 14, 10, 2.0, 14.0, 6),
        (Species::D2Plus, 1, 12, 8, 2.0, 14.0, 4),
        (Species::HDPlus, 1, 10, 8, 2.0, 12.0, 4),
        (Species::H2Plus, 2, 8, 6, 1.5, 6.0, 2),
    ];
    for (species, j, n, n_x, alpha, beta, count) in cases {
        let ham = derive(
            j,
            species.is_homonuclear(),
            ExchangeSector::natural(species, j),
        )
        .unwrap();
        let pair = assemble(
            &ham,
            n,
            n_x,
            ScaleParams::new(alpha, beta).unwrap(),
            species.label(),
        )
        .unwrap();
        let p = Problem::from_pair(&pair, &reduced_masses(&SystemSpec::codata2002(species)));
        let dense = dense_eigenvalues(&p);
        let sol = solve(&p, &SolveRequest::window(count)).unwrap();
        for l in &sol.levels {
            let d = (l.energy - dense[l.v]).abs();
            assert!(
                d <= 1e-12,
                "{species} J={j} N={n} v={}: {} vs {} ({d:.1e})",
                l.v,
                l.energy,
                dense[l.v]
            );
        }
    }
}
