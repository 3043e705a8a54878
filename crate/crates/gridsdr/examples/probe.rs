use gridsdr::caseio::{parse_matpower, preprocess, PreprocessOptions};
use num_complex::Complex64;
use gridsdr::chordal::{
    convert, decompose, fill_reducing_order, herm_to_sym, merge_cliques, EliminationOrder,
    SparsityPattern,
};
use gridsdr::conesolve::{solve, Settings};
use gridsdr::netmodel::NetModel;
use gridsdr::relax::build_sdr;

fn section(src: &str, name: &str) -> Vec<Vec<f64>> {
    let start = src.find(&format!("mpc.{name} = [")).unwrap();
    let body = &src[start..src[start..].find("];").unwrap() + start];
    body.lines()
        .skip(1)
        .filter_map(|l| {
            let l = l.trim().trim_end_matches(';');
            let row: Vec<f64> = l.split_whitespace().filter_map(|t| t.parse().ok()).collect();
            (!row.is_empty()).then_some(row)
        })
        .collect()
}

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "case9".into());
    let path = format!("{}/../../data/cases/{}.m", env!("CARGO_MANIFEST_DIR"), name);
    let src = std::fs::read_to_string(path).unwrap();
    let case = parse_matpower(&src).unwrap();
    let (case, _) = preprocess(&case, &PreprocessOptions::default()).unwrap();
    let model = NetModel::build(&case);
    let prob0 = build_sdr(&case, &model);
    let lp = prob0.lp.clone();
    eprintln!("raw: n={} m={} blocks={}", lp.n_var(), lp.n_row(), lp.blocks.len());

    if std::env::args().any(|a| a == "--feas") {
        // Embed the operating point stored in the file and report the
        // residuals it leaves in the relaxation.
        let base = case.base_mva;
        let mut vm = std::collections::HashMap::new();
        for row in section(&src, "bus") {
            vm.insert(row[0] as u32, Complex64::from_polar(row[7], row[8].to_radians()));
        }
        let v: Vec<Complex64> = case.buses.iter().map(|b| vm[&b.id]).collect();
        let grows = section(&src, "gen");
        let p: Vec<f64> = grows.iter().map(|r| r[1] / base).collect();
        let q: Vec<f64> = grows.iter().map(|r| r[2] / base).collect();
        let x = gridsdr::relax::embed_point(&case, &model, &prob0.index, &v, &p, &q);
        let r: Vec<f64> = lp.a.mul_vec(&x).iter().zip(&lp.b).map(|(ax, b)| ax - b).collect();
        let mut worst: Vec<(f64, usize)> = r.iter().enumerate().map(|(i, v)| (v.abs(), i)).collect();
        worst.sort_by(|a, b| b.0.total_cmp(&a.0));
        for &(vv, i) in worst.iter().take(12) {
            eprintln!("feas row {i:5} |r|={vv:.3e} {:?}", prob0.index.rows[i]);
        }
        let mut start = 0;
        for &blk in &lp.blocks {
            let end = start + blk.len();
            let d = gridsdr::cones::distance(&[blk], &x[start..end]);
            if d > 1e-9 {
                eprintln!("cone {blk:?} at {start}: dist {d:.3e}");
            }
            start = end;
        }
        return;
    }

    let raw = std::env::args().any(|a| a == "--raw");
    let sym = std::env::args().any(|a| a == "--sym");
    let herm_lp = if raw {
        lp.clone()
    } else {
        let pattern = SparsityPattern::from_lp(&lp);
        let dec = decompose(&pattern, &fill_reducing_order(&pattern, EliminationOrder::Amd));
        let dec = merge_cliques(&dec, 12, Some(2.0));
        let stats = dec.stats();
        eprintln!("cliques: {} max {} coupling {}", stats.count, stats.max_size, stats.coupling_scalars);
        convert(&lp, &dec).unwrap().lp
    };
    let real_lp = if sym { herm_to_sym(&herm_lp).0 } else { herm_lp };
    eprintln!("solving: n={} m={} blocks={}", real_lp.n_var(), real_lp.n_row(), real_lp.blocks.len());
    {
        let (_, sc) = gridsdr::conesolve::equilibrate(&real_lp, 10);
        let dmax = sc.d.iter().cloned().fold(0.0f64, f64::max);
        let dmin = sc.d.iter().cloned().fold(f64::INFINITY, f64::min);
        let emax = sc.e.iter().cloned().fold(0.0f64, f64::max);
        let emin = sc.e.iter().cloned().fold(f64::INFINITY, f64::min);
        eprintln!(
            "scaling: d in [{dmin:.2e}, {dmax:.2e}] e in [{emin:.2e}, {emax:.2e}] sigma_b {:.2e} sigma_c {:.2e}",
            sc.sigma_b, sc.sigma_c
        );
    }

    let iters: usize = std::env::args()
        .nth(2)
        .and_then(|v| v.parse().ok())
        .unwrap_or(100_000);
    let alpha: f64 = std::env::var("PROBE_ALPHA").ok().and_then(|v| v.parse().ok()).unwrap_or(1.5);
    let scale_iters: usize =
        std::env::var("PROBE_SCALE").ok().and_then(|v| v.parse().ok()).unwrap_or(10);
    let regularization: f64 =
        std::env::var("PROBE_REG").ok().and_then(|v| v.parse().ok()).unwrap_or(1e-7);
    let refine_steps: usize =
        std::env::var("PROBE_REFINE").ok().and_then(|v| v.parse().ok()).unwrap_or(2);
    let eps: f64 = std::env::var("PROBE_EPS").ok().and_then(|v| v.parse().ok()).unwrap_or(1e-5);
    let settings = Settings {
        max_iters: iters,
        check_every: 250,
        verbose: true,
        alpha,
        scale_iters,
        regularization,
        refine_steps,
        ..Settings::with_eps(eps)
    };
    let t0 = std::time::Instant::now();
    let sol = solve(&real_lp, &settings);
    eprintln!(
        "status {} obj {:.4} dual {:.4} iters {} in {:.1?}\nmetrics {:?}",
        sol.status,
        sol.objective,
        sol.dual_objective,
        sol.iters,
        t0.elapsed(),
        sol.metrics
    );

    // Worst primal-residual rows by label class.
    let prob = build_sdr(&case, &model);
    let r: Vec<f64> = real_lp
        .a
        .mul_vec(&sol.x)
        .iter()
        .zip(&real_lp.b)
        .map(|(ax, b)| ax - b)
        .collect();
    let mut worst: Vec<(f64, usize)> =
        r.iter().enumerate().map(|(i, v)| (v.abs(), i)).collect();
    worst.sort_by(|a, b| b.0.total_cmp(&a.0));
    for &(v, i) in worst.iter().take(15) {
        let label = if i < prob.index.rows.len() {
            format!("{:?}", prob.index.rows[i])
        } else {
            format!("coupling[{}]", i - prob.index.rows.len())
        };
        eprintln!("row {i:6} |r|={v:.3e} {label}");
    }
    eprintln!("|b|_inf = {:.3e}", real_lp.b.iter().fold(0.0f64, |w, v| w.max(v.abs())));
}
