mod common;

use common::{fdp_by_chain, sri_by_lines};
use reanalysis::costmodel::{ratio_at, SweepSeries};
use reanalysis::{flops_fdp, flops_pcg, flops_sri, ratio_sweep, SweepMode, SweepSpec};

#[test]
fn closed_forms_equal_line_tallies() {
    for n in [1u64, 7, 100, 9480, 1_000_000] {
        for q in [0u64, 1, 3, n / 3, n] {
            assert_eq!(flops_fdp(n, q), fdp_by_chain(n as u128, q as u128));
            for k in [0u64, 1, 19, q] {
                assert_eq!(
                    flops_sri(n, q, k),
                    sri_by_lines(n as u128, q as u128, k as u128),
                    "n={n} q={q} k={k}"
                );
            }
        }
    }
}

#[test]
fn pcg_counts_by_hand() {
    // start-up 4n² + n, then 6n² + 14n + 2 per iteration
    assert_eq!(flops_pcg(3, 0), 39);
    assert_eq!(flops_pcg(3, 2), 39 + 2 * (54 + 42 + 2));
    assert_eq!(
        flops_pcg(10_000, 1),
        4 * 10u128.pow(8) + 10_000 + 6 * 10u128.pow(8) + 140_002
    );
}

fn non_decreasing(s: &SweepSeries) -> bool {
    s.ratios.windows(2).all(|w| w[1] >= w[0])
}

#[test]
fn sweeps_rise_along_the_axis_and_cross_below_one() {
    let pcg = ratio_sweep(&SweepSpec::default_for(SweepMode::SriVsPcg)).unwrap();
    assert_eq!(pcg.axis.first().copied(), Some(0.05));
    assert!((pcg.axis.last().unwrap() - 0.90).abs() < 1e-12);
    for s in &pcg.series {
        assert!(non_decreasing(s), "k_s = {}", s.label);
        assert!(s.ratios[0] < 1.0, "k_s = {}", s.label);
    }

    let fdp = ratio_sweep(&SweepSpec::default_for(SweepMode::SriVsFdp)).unwrap();
    for s in &fdp.series {
        assert!(non_decreasing(s), "q/n = {}", s.label);
        assert!(s.ratios[0] < 1.0, "q/n = {}", s.label);
    }
}

#[test]
fn ratio_points_use_rounded_counts() {
    let n = 10_000;
    let r = ratio_at(SweepMode::SriVsFdp, n, 0.1, 0.3);
    let expected = flops_sri(n, 3000, 300) as f64 / flops_fdp(n, 3000) as f64;
    assert_eq!(r, expected);
    let r = ratio_at(SweepMode::SriVsPcg, n, 0.25, 0.5);
    let expected = flops_sri(n, 2500, 1250) as f64 / flops_pcg(n, 5000) as f64;
    assert_eq!(r, expected);
}

#[test]
fn invalid_sweeps_are_rejected() {
    let base = SweepSpec::default_for(SweepMode::SriVsPcg);
    assert!(ratio_sweep(&SweepSpec {
        n: 0,
        ..base.clone()
    })
    .is_err());
    assert!(ratio_sweep(&SweepSpec {
        axis_min: 0.5,
        axis_max: 0.1,
        ..base.clone()
    })
    .is_err());
    assert!(ratio_sweep(&SweepSpec {
        labels: vec![f64::NAN],
        ..base
    })
    .is_err());
}
