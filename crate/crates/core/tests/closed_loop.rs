use dfig_core::controller::{PowerPredictor, DEFAULT_K};
use dfig_core::plant::{Plant, TurbineParams};
use dfig_core::scenario::{
    gen_wind, parse_scenario, read_results, write_results, SyntheticWindSpec, WindSeries,
};
use dfig_core::sim::SimLog;

fn run(text: &str) -> SimLog {
    parse_scenario(text).unwrap().run(None).unwrap()
}

#[test]
fn same_seed_same_log() {
    let text = "duration = 60\nwind_seed = 4\npd_schedule = 0:1.0, 30:0.3\n";
    assert_eq!(run(text), run(text));
}

#[test]
fn halving_the_step_barely_moves_the_final_state() {
    let coarse = run("wind_speed = 10\npd_schedule = 0:0.3\nduration = 20\ndt = 0.0005\nlog_stride = 200\n");
    let fine = run("wind_speed = 10\npd_schedule = 0:0.3\nduration = 20\ndt = 0.00025\nlog_stride = 400\n");
    let (a, b) = (coarse.rows.last().unwrap(), fine.rows.last().unwrap());
    assert_eq!(a.t, b.t);
    let pairs = [
        (a.phi[0], b.phi[0]),
        (a.phi[1], b.phi[1]),
        (a.phi[2], b.phi[2]),
        (a.phi[3], b.phi[3]),
        (a.omega_r, b.omega_r),
        (a.g_hat, b.g_hat),
    ];
    for (x, y) in pairs {
        assert!((x - y).abs() <= 1e-4 * x.abs().max(y.abs()), "{x} vs {y}");
    }
}

#[test]
fn power_and_speed_stay_bounded() {
    let log = run("duration = 240\npd_schedule = 0:1.0, 80:0.3, 160:1.0\nwind_seed = 2\n");
    for r in log.window(1.0, f64::INFINITY) {
        assert!(r.omega_r > 0.0, "t = {}", r.t);
    }
    for r in log.window(5.0, f64::INFINITY) {
        assert!(r.p.abs() <= 1.2, "P = {} at t = {}", r.p, r.t);
    }
}

#[test]
fn steady_state_matches_prediction() {
    let log = run("wind_speed = 10\npd_schedule = 0:0.3\nduration = 300\n");
    let pred = PowerPredictor::new(Plant::new(TurbineParams::default()).unwrap(), DEFAULT_K).unwrap();
    let mut worst: f64 = 0.0;
    for r in log.window(250.0, f64::INFINITY) {
        let (p, q) = pred.predict(r.r2, r.theta, r.omega_r);
        worst = worst.max((p - r.p).abs()).max((q - r.q).abs());
    }
    assert!(worst < 0.02, "worst prediction error {worst}");
}

#[test]
fn results_csv_has_one_line_per_row() {
    let log = run("wind_speed = 10\nduration = 0.001\ndt = 0.0005\nlog_stride = 1\n");
    assert_eq!(log.len(), 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    write_results(&log, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 4);
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "t,v_w,phi_ds,phi_qs,phi_dr,phi_qr,i_ds,i_qs,i_dr,i_qr,omega_r,omega_rd,g_hat,r2,theta,\
         beta,v_dr,v_qr,p,q,pf,cp,lambda,u,p_d,q_d,pf_d,e_p"
    );
    assert_eq!(read_results(&path).unwrap().len(), 3);
}

fn sample_mean(ws: &WindSeries) -> f64 {
    let pts = ws.points();
    pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64
}

#[test]
fn synthetic_wind_statistics() {
    let spec = SyntheticWindSpec {
        mean: 10.0,
        relaxation: 60.0,
        volatility: 0.6,
        ..SyntheticWindSpec::default()
    };
    let ws = gen_wind(&spec, 3600.0, 1.0).unwrap();
    assert!((sample_mean(&ws) - 10.0).abs() < 0.5, "{}", sample_mean(&ws));
    assert!(ws.points().iter().all(|p| (spec.min..=spec.max).contains(&p.1)));

    // Across seeds the hourly mean is unbiased and spreads as the
    // process autocorrelation predicts: σ_s·sqrt(2τ/T) ≈ 0.6 m/s here.
    let means: Vec<f64> = (0..200)
        .map(|seed| sample_mean(&gen_wind(&SyntheticWindSpec { seed, ..spec.clone() }, 3600.0, 1.0).unwrap()))
        .collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let sd = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt();
    let expected = spec.stationary_std() * (2.0 * spec.relaxation / 3600.0).sqrt();
    assert!((m - 10.0).abs() < 0.15, "mean of means {m}");
    assert!((sd / expected - 1.0).abs() < 0.25, "spread {sd} vs {expected}");
}

#[test]
fn default_wind_band() {
    let ws = gen_wind(&SyntheticWindSpec::default(), 3600.0, 1.0).unwrap();
    let lo = ws.points().iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = ws.points().iter().map(|p| p.1).fold(0.0, f64::max);
    assert!(lo > 7.0 && hi < 14.0, "{lo}..{hi}");
}
