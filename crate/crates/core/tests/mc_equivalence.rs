//! Monte-Carlo checks of the closed forms on the components where they are exact.

use drha::mc_oracle::{mc_expected, mc_global, mc_global_variant, mc_local, mc_shrinkage, mc_table_avg, TableLayer};
use drha::mechanisms::PrivacyParams;
use drha::risk::{
    rho_e_cell, rho_g, rho_g_variant, rho_homog_avg, rho_local, rho_s_avg, CellSizeModel, DirichletHyper, SeriesOptions,
};
use drha::synthetic::homogeneous_table;
use drha::tabulation::CellRecord;

const REPS: u64 = 100_000;

fn mechanisms() -> Vec<PrivacyParams> {
    vec![
        PrivacyParams::laplace(0.7).unwrap(),
        PrivacyParams::gaussian_adp(0.5, 1e-3).unwrap(),
        PrivacyParams::gaussian_pdp(2.0, 1e-5).unwrap(),
    ]
}

fn cell(counts: &[u64]) -> CellRecord {
    CellRecord {
        key: vec![],
        counts: counts.to_vec(),
    }
}

fn within(mc: f64, se: f64, want: f64) -> bool {
    (mc - want).abs() <= 4.0 * se.max(1e-9)
}

#[test]
fn local_risk_any_cell() {
    let cells: [&[u64]; 5] = [&[4, 0], &[1, 1], &[9, 1, 0], &[2, 3, 5], &[0, 0, 7, 1]];
    for (i, p) in mechanisms().iter().enumerate() {
        let noise = p.noise().unwrap();
        for (j, c) in cells.iter().enumerate() {
            let want = rho_local(&cell(c), &noise).risk;
            let e = mc_local(c, p, REPS, (i * 10 + j) as u64).unwrap();
            assert!(within(e.value, e.se, want.value), "{c:?} {p:?}: {} vs {}", e.value, want.value);
            let (s8, se8) = e.scenario8();
            assert!(within(s8, se8, want.scenario8));
        }
    }
}

#[test]
fn expected_scenario1_component() {
    let cells: [&[u64]; 4] = [&[3, 1], &[2, 2, 1], &[6, 0, 1], &[1, 1]];
    for (i, p) in mechanisms().iter().enumerate() {
        let noise = p.noise().unwrap();
        for (j, c) in cells.iter().enumerate() {
            let n: u64 = c.iter().sum();
            let phat: Vec<f64> = c.iter().map(|&x| x as f64 / n as f64).collect();
            let want = rho_e_cell(&cell(c), &noise);
            let e = mc_expected(n, &phat, p, REPS, (100 + i * 10 + j) as u64).unwrap();
            let (s1, se1) = e.scenario1();
            assert!(within(s1, se1, want.scenario1), "{c:?}: {s1} vs {}", want.scenario1);
        }
    }
}

#[test]
fn shrinkage_scenario1_component() {
    let h = DirichletHyper::new(vec![0.8, 2.0, 1.3]).unwrap();
    for (i, p) in mechanisms().iter().enumerate() {
        let noise = p.noise().unwrap();
        for n in [1u64, 2, 5, 12] {
            let want = rho_s_avg(&[n], &h, &noise).unwrap();
            let e = mc_shrinkage(n, &h, p, REPS, 200 + i as u64 * 20 + n).unwrap();
            let (s1, se1) = e.scenario1();
            assert!(within(s1, se1, want.scenario1), "n={n}: {s1} vs {}", want.scenario1);
        }
    }
}

#[test]
fn global_scenario1_component() {
    let h = DirichletHyper::new(vec![1.5, 0.7]).unwrap();
    let models = [CellSizeModel::poisson(3.0).unwrap(), CellSizeModel::negbin(2.0, 0.4).unwrap()];
    for (i, p) in mechanisms().iter().enumerate() {
        let noise = p.noise().unwrap();
        for (j, m) in models.iter().enumerate() {
            let want = rho_g(&h, m, &noise, &SeriesOptions::zero_truncated()).unwrap().risk;
            let e = mc_global(&h, m, p, REPS, 300 + (i * 10 + j) as u64).unwrap();
            let (s1, se1) = e.scenario1();
            assert!(within(s1, se1, want.scenario1), "{m:?}: {s1} vs {}", want.scenario1);
        }
    }
}

#[test]
fn global_variant_total() {
    let models = [CellSizeModel::poisson(4.6).unwrap(), CellSizeModel::negbin(1.2, 0.3).unwrap()];
    for (i, p) in mechanisms().iter().enumerate() {
        let noise = p.noise().unwrap();
        for (j, m) in models.iter().enumerate() {
            let want = rho_g_variant(m, &noise, 3, &SeriesOptions::zero_truncated()).unwrap().risk.value;
            let e = mc_global_variant(m, 3, p, REPS, 400 + (i * 10 + j) as u64).unwrap();
            assert!(within(e.value, e.se, want), "{m:?}: {} vs {want}", e.value);
            assert_eq!(e.scenarios.get(8), 0);
        }
    }
}

#[test]
fn homogeneous_table_average() {
    let t = homogeneous_table(&[1, 2, 3, 5, 8, 13], 3, 9).unwrap();
    for (i, p) in mechanisms().iter().enumerate() {
        let want = rho_homog_avg(&t, p).unwrap();
        let e = mc_table_avg(&t, &TableLayer::Local, p, 20_000, 500 + i as u64).unwrap();
        assert!(within(e.value, e.se, want), "{} vs {want}", e.value);
    }
}
