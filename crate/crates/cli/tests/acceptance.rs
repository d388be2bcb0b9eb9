//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints its own verdict line; exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use gridplan::chance::{required_scenario_count, ChanceConfig};
use gridplan::consensus::{
    convergence, residuals, run, run_from, z_update_boundary, z_update_design, AdmmConfig, AdmmOutcome, AdmmState,
    AdmmStatus, ConsensusProblem,
};
use gridplan::ingest::{normalize_load, solar_power, wind_power, BoundaryMap, SolarConfig, WindConfig};
use gridplan::model::*;
use gridplan_cli::{plan, scenario_count, sweep_rdc, RunConfig};
use gridplan_qp::{solve_ipm, IpmSettings, QpBuilder, Status};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn fixture_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/synthetic/run.toml")
}

// ---------------------------------------------------------------------------
// Dense primal-dual interior point, used as an independent oracle.

/// `min ½xᵀPx + cᵀx  s.t.  Ax = b, Gx ≤ h`
struct DenseQp {
    p: DMatrix<f64>,
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
}

impl DenseQp {
    fn new(n: usize) -> Self {
        Self {
            p: DMatrix::zeros(n, n),
            c: DVector::zeros(n),
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
            g: DMatrix::zeros(0, n),
            h: DVector::zeros(0),
        }
    }

    fn push_row(m: &mut DMatrix<f64>, v: &mut DVector<f64>, row: &[(usize, f64)], rhs: f64) {
        let r = m.nrows();
        *m = m.clone().insert_row(r, 0.0);
        *v = v.clone().insert_row(r, rhs);
        for &(i, a) in row {
            m[(r, i)] += a;
        }
    }

    fn eq(&mut self, row: &[(usize, f64)], rhs: f64) {
        Self::push_row(&mut self.a, &mut self.b, row, rhs);
    }

    fn le(&mut self, row: &[(usize, f64)], rhs: f64) {
        Self::push_row(&mut self.g, &mut self.h, row, rhs);
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.c.dot(x)
    }

    /// Mehrotra predictor-corrector on the reduced normal equations.
    fn solve(&self) -> Option<DVector<f64>> {
        let n = self.c.len();
        let (me, mi) = (self.b.len(), self.h.len());
        let mut x = DVector::zeros(n);
        let mut y = DVector::zeros(me);
        let mut s = (&self.h - &self.g * &x).map(|v| v.max(1.0));
        let mut z = DVector::from_element(mi, 1.0);
        for _ in 0..300 {
            let r_d = &self.p * &x + &self.c + self.a.transpose() * &y + self.g.transpose() * &z;
            let r_p = &self.a * &x - &self.b;
            let r_g = &self.g * &x + &s - &self.h;
            let mu = s.dot(&z) / mi as f64;
            if r_d.amax() < 1e-10 && r_p.amax() < 1e-10 && r_g.amax() < 1e-10 && mu < 1e-12 {
                return Some(x);
            }
            let w = z.component_div(&s);
            let mut k = DMatrix::zeros(n + me, n + me);
            let h = &self.p + self.g.transpose() * DMatrix::from_diagonal(&w) * &self.g;
            k.view_mut((0, 0), (n, n)).copy_from(&h);
            k.view_mut((0, n), (n, me)).copy_from(&self.a.transpose());
            k.view_mut((n, 0), (me, n)).copy_from(&self.a);
            let lu = k.full_piv_lu();
            let step = |r_c: &DVector<f64>| {
                // ds = −r_g − G dx, dz = S⁻¹(−r_c + Z r_g) + W G dx
                let t = (-r_c + z.component_mul(&r_g)).component_div(&s);
                let mut rhs = DVector::zeros(n + me);
                rhs.rows_mut(0, n).copy_from(&(-&r_d - self.g.transpose() * &t));
                rhs.rows_mut(n, me).copy_from(&(-&r_p));
                let sol = lu.solve(&rhs)?;
                let dx = sol.rows(0, n).into_owned();
                let dy = sol.rows(n, me).into_owned();
                let gdx = &self.g * &dx;
                let ds = -&r_g - &gdx;
                let dz = t + w.component_mul(&gdx);
                Some((dx, dy, ds, dz))
            };
            let max_step = |v: &DVector<f64>, dv: &DVector<f64>| {
                v.iter()
                    .zip(dv.iter())
                    .filter(|(_, d)| **d < 0.0)
                    .map(|(a, d)| -a / d)
                    .fold(1.0_f64, f64::min)
            };
            let (_, _, ds_a, dz_a) = step(&s.component_mul(&z))?;
            let alpha_a = max_step(&s, &ds_a).min(max_step(&z, &dz_a));
            let mu_a = (&s + alpha_a * &ds_a).dot(&(&z + alpha_a * &dz_a)) / mi as f64;
            let sigma = (mu_a / mu).powi(3);
            let r_c = s.component_mul(&z) + ds_a.component_mul(&dz_a) - DVector::from_element(mi, sigma * mu);
            let (dx, dy, ds, dz) = step(&r_c)?;
            let alpha = (0.99 * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);
            x += alpha * dx;
            y += alpha * dy;
            s += alpha * ds;
            z += alpha * dz;
        }
        None
    }
}

// ---------------------------------------------------------------------------
// Instances.

fn oracle_system() -> SystemSpec {
    SystemSpec {
        storages: vec![StorageSpec {
            id: "battery".into(),
            eta: 0.9,
            delta: 0.5,
            xi: 0.01,
            inv_cost: 200.0,
            amort: 0.01,
            om_coeff: 0.1,
            cap_min: 0.0,
            cap_max: 5.0,
        }],
        renewables: vec![RenewableSpec {
            id: "wind".into(),
            kind: RenewableKind::Wind,
            inv_cost: 300.0,
            amort: 0.01,
            om_coeff: 0.2,
            cap_min: 0.0,
            cap_max: 5.0,
        }],
        diesels: vec![DieselSpec {
            id: "diesel".into(),
            inv_cost: 100.0,
            amort: 0.01,
            om_quad: (2.0, 3.0, 0.0),
            ramp_up: 0.6,
            ramp_down: -0.6,
            cap_min: 0.0,
            cap_max: 1.0,
        }],
    }
}

fn oracle_problem() -> ConsensusProblem {
    let d = [[1.0, 1.4, 0.8], [1.2, 0.6, 1.1]];
    let w = [[0.9, 0.1, 0.6], [0.2, 0.8, 0.3]];
    let scenarios = (0..2)
        .map(|j| ScenarioData {
            index: j,
            demand: d[j].to_vec(),
            per_unit_gen: vec![w[j].to_vec()],
            dt: 1.0,
            initial_soc: None,
        })
        .collect();
    ConsensusProblem {
        system: oracle_system(),
        policy: RatioPolicy::new(0.05, 0.5),
        scenarios,
        map: BoundaryMap::chained(2, 1),
    }
}

/// Random chained instance with one renewable and one diesel; `dt = 1`.
fn random_problem(seed: u64, scenarios: usize, periods: usize, storages: usize) -> ConsensusProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let storages = (0..storages)
        .map(|s| StorageSpec {
            id: format!("s{s}"),
            eta: rng.gen_range(0.8..0.97),
            delta: rng.gen_range(0.2..1.0),
            xi: rng.gen_range(0.0..0.03),
            inv_cost: rng.gen_range(50.0..300.0),
            amort: 0.01,
            om_coeff: rng.gen_range(0.05..1.0),
            cap_min: 0.0,
            cap_max: 4.0,
        })
        .collect();
    let system = SystemSpec {
        storages,
        renewables: vec![RenewableSpec {
            id: "wind".into(),
            kind: RenewableKind::Wind,
            inv_cost: rng.gen_range(100.0..400.0),
            amort: 0.01,
            om_coeff: rng.gen_range(0.0..0.5),
            cap_min: 0.0,
            cap_max: 6.0,
        }],
        diesels: vec![DieselSpec {
            id: "diesel".into(),
            inv_cost: rng.gen_range(50.0..150.0),
            amort: 0.01,
            om_quad: (rng.gen_range(0.5..3.0), rng.gen_range(2.0..8.0), 0.0),
            ramp_up: f64::INFINITY,
            ramp_down: f64::NEG_INFINITY,
            cap_min: 0.0,
            cap_max: 0.7,
        }],
    };
    let data = (0..scenarios)
        .map(|j| ScenarioData {
            index: j,
            demand: (0..periods).map(|_| rng.gen_range(0.5..1.5)).collect(),
            per_unit_gen: vec![(0..periods).map(|_| rng.gen_range(0.0..1.0)).collect()],
            dt: 1.0,
            initial_soc: None,
        })
        .collect();
    let map = BoundaryMap::chained(scenarios, system.storages.len());
    ConsensusProblem {
        system,
        policy: RatioPolicy::new(0.05, 0.7),
        scenarios: data,
        map,
    }
}

/// The whole chained horizon as one QP, written directly from the model
/// equations: one state trajectory across all scenarios, shared capacities.
/// Returns the objective and the capacities.
fn monolithic_oracle(problem: &ConsensusProblem) -> Option<(f64, Vec<f64>)> {
    let sys = &problem.system;
    assert!(problem.scenarios.iter().all(|d| d.dt == 1.0));
    let (ns, nr, nh) = (sys.storages.len(), sys.renewables.len(), sys.diesels.len());
    let nd = ns + nr + nh;
    let tt: usize = problem.scenarios.iter().map(|d| d.demand.len()).sum();
    let demand: Vec<f64> = problem.scenarios.iter().flat_map(|d| d.demand.clone()).collect();
    let gen: Vec<Vec<f64>> = (0..nr)
        .map(|r| {
            problem
                .scenarios
                .iter()
                .flat_map(|d| d.per_unit_gen[r].clone())
                .collect()
        })
        .collect();
    // Layout: design, soc[s][0..=tt], dis[s][tt], chg[s][tt], h[h][tt], g[tt].
    let soc = |s: usize, t: usize| nd + s * (tt + 1) + t;
    let dis = |s: usize, t: usize| nd + ns * (tt + 1) + s * tt + t;
    let chg = |s: usize, t: usize| nd + ns * (tt + 1) + ns * tt + s * tt + t;
    let hh = |h: usize, t: usize| nd + ns * (tt + 1) + 2 * ns * tt + h * tt + t;
    let gg = |t: usize| nd + ns * (tt + 1) + 2 * ns * tt + nh * tt + t;
    let n = gg(tt);
    let mut qp = DenseQp::new(n);
    let tf = tt as f64;

    for (k, (lo, hi)) in sys.design_bounds().into_iter().enumerate() {
        qp.le(&[(k, -1.0)], -lo);
        qp.le(&[(k, 1.0)], hi);
    }
    for (s, spec) in sys.storages.iter().enumerate() {
        qp.c[s] += tf * spec.amort * spec.inv_cost;
        for t in 0..=tt {
            qp.le(&[(soc(s, t), -1.0)], 0.0);
            qp.le(&[(soc(s, t), 1.0), (s, -1.0)], 0.0);
        }
        for t in 0..tt {
            qp.c[dis(s, t)] += spec.om_coeff;
            qp.c[chg(s, t)] += spec.om_coeff;
            // S_{t+1} = S_t − P⁺/η + η P⁻ − ξ S_t
            qp.eq(
                &[
                    (soc(s, t + 1), 1.0),
                    (soc(s, t), -(1.0 - spec.xi)),
                    (dis(s, t), 1.0 / spec.eta),
                    (chg(s, t), -spec.eta),
                ],
                0.0,
            );
            qp.le(&[(dis(s, t), -1.0)], 0.0);
            qp.le(&[(chg(s, t), -1.0)], 0.0);
            qp.le(&[(dis(s, t), 1.0), (s, -spec.eta * spec.delta)], 0.0);
            qp.le(&[(chg(s, t), 1.0), (s, -spec.delta)], 0.0);
        }
    }
    for (r, spec) in sys.renewables.iter().enumerate() {
        let k = ns + r;
        qp.c[k] += tf * spec.amort * spec.inv_cost + spec.om_coeff * gen[r].iter().sum::<f64>();
    }
    let mut constant = 0.0;
    for (h, spec) in sys.diesels.iter().enumerate() {
        let k = ns + nr + h;
        qp.c[k] += tf * spec.amort * spec.inv_cost;
        let (q2, q1, q0) = spec.om_quad;
        for t in 0..tt {
            qp.p[(hh(h, t), hh(h, t))] += 2.0 * q2;
            qp.c[hh(h, t)] += q1;
            constant += q0;
            qp.le(&[(hh(h, t), -1.0)], 0.0);
            qp.le(&[(hh(h, t), 1.0), (k, -1.0)], 0.0);
        }
        // Ramps apply within each scenario only.
        let mut start = 0;
        for d in &problem.scenarios {
            for t in start..start + d.demand.len() - 1 {
                if spec.ramp_up.is_finite() {
                    qp.le(&[(hh(h, t + 1), 1.0), (hh(h, t), -1.0)], spec.ramp_up);
                }
                if spec.ramp_down.is_finite() {
                    qp.le(&[(hh(h, t), 1.0), (hh(h, t + 1), -1.0)], -spec.ramp_down);
                }
            }
            start += d.demand.len();
        }
    }
    for t in 0..tt {
        // D = ΣR + ΣH + Σ(P⁺ − P⁻) + G, and G ≤ r_SD·D
        let mut row = vec![(gg(t), 1.0)];
        for r in 0..nr {
            row.push((ns + r, gen[r][t]));
        }
        for h in 0..nh {
            row.push((hh(h, t), 1.0));
        }
        for s in 0..ns {
            row.push((dis(s, t), 1.0));
            row.push((chg(s, t), -1.0));
        }
        qp.eq(&row, demand[t]);
        qp.le(&[(gg(t), 1.0)], problem.policy.r_sd * demand[t]);
    }
    let x = qp.solve()?;
    Some((qp.objective(&x) + constant, x.rows(0, nd).iter().copied().collect()))
}

fn feasibility_failures(problem: &ConsensusProblem, out: &AdmmOutcome, tol: f64) -> Vec<String> {
    let mut failures = Vec::new();
    for (j, (vars, data)) in out.scenarios.iter().zip(&problem.scenarios).enumerate() {
        let report = check_feasible(vars, data, &problem.system, &problem.policy, tol).expect("dimensions");
        for f in report.violated() {
            failures.push(format!("scenario {j}: {} ({:.2e})", f.name(), report.get(f).scaled));
        }
    }
    failures
}

fn junction_gap(out: &AdmmOutcome) -> f64 {
    out.scenarios
        .windows(2)
        .flat_map(|w| {
            w[1].initial_soc()
                .into_iter()
                .zip(w[0].final_soc())
                .map(|(a, b)| (a - b).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Criteria.

fn oracle_equivalence() -> Verdict {
    let problem = oracle_problem();
    let t0 = Instant::now();
    let out = run(&problem, &AdmmConfig::default()).map_err(|e| e.to_string())?;
    let (obj, caps) = monolithic_oracle(&problem).ok_or("oracle did not converge")?;
    let elapsed = t0.elapsed().as_secs_f64();
    let rel = (out.objective - obj).abs() / obj.abs();
    let cap_err = out
        .plan
        .design
        .iter()
        .zip(&caps)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let detail = format!(
        "{:?} after {} iterations, objective {:.6} vs {:.6} (rel {rel:.1e}), capacity error {cap_err:.1e}, {elapsed:.2} s",
        out.status, out.state.k, out.objective, obj
    );
    if out.status == AdmmStatus::Converged && rel <= 1e-3 && cap_err <= 1e-2 && elapsed < 10.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn complementarity() -> Verdict {
    let t0 = Instant::now();
    let (mut checked, mut worst, mut seed) = (0, 0.0_f64, 0u64);
    let mut skipped = 0;
    while checked < 24 && seed < 60 {
        let p = random_problem(
            1000 + seed,
            2 + seed as usize % 2,
            4 + seed as usize % 3,
            1 + seed as usize % 2,
        );
        seed += 1;
        let out = run(&p, &AdmmConfig::default()).map_err(|e| format!("seed {seed}: {e}"))?;
        if out.status != AdmmStatus::Converged {
            skipped += 1;
            continue;
        }
        checked += 1;
        for v in &out.scenarios {
            for (d, c) in v.discharge.iter().zip(&v.charge) {
                for (a, b) in d.iter().zip(c) {
                    worst = worst.max(a.min(*b) / (a + b).max(1.0));
                }
            }
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let detail = format!(
        "{checked} converged instances ({skipped} skipped), worst min(P+,P-)/max(1,P++P-) = {worst:.1e}, {elapsed:.1} s"
    );
    if checked >= 20 && worst <= 1e-6 && elapsed < 60.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn closed_form_z_updates() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let settings = IpmSettings {
        eps_abs: 1e-13,
        eps_rel: 1e-13,
        ..IpmSettings::default()
    };
    let mut worst = 0.0_f64;
    for trial in 0..200 {
        let j_count = rng.gen_range(1..6);
        let n = rng.gen_range(1..7);
        let rho = rng.gen_range(0.1..20.0);
        let bounds: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let lo = rng.gen_range(-2.0..1.0);
                (
                    lo,
                    if rng.gen_bool(0.2) {
                        f64::INFINITY
                    } else {
                        lo + rng.gen_range(0.1..3.0)
                    },
                )
            })
            .collect();
        let xs: Vec<Vec<f64>> = (0..j_count)
            .map(|_| (0..n).map(|_| rng.gen_range(-3.0..4.0)).collect())
            .collect();
        let vs: Vec<Vec<f64>> = (0..j_count)
            .map(|_| (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();

        // Σ_j −v_jᵀz + ρ/2‖x_j − z‖² over the box.
        let mut b = QpBuilder::new(n);
        for i in 0..n {
            b.add_quadratic(i, i, rho * j_count as f64);
            b.add_linear(i, -(0..j_count).map(|j| vs[j][i] + rho * xs[j][i]).sum::<f64>());
            b.set_bounds(i, bounds[i].0, bounds[i].1);
        }
        let r = solve_ipm(&b.build(), &settings).map_err(|e| e.to_string())?;
        if r.status != Status::Optimal {
            return Err(format!("design trial {trial}: QP status {:?}", r.status));
        }
        let xr: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let vr: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
        let closed = z_update_design(&xr, &vr, rho, &bounds);
        worst = worst.max(closed.iter().zip(&r.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));

        // Boundary: a chained map, then a random one.
        let storages = rng.gen_range(1..4);
        let mut map = BoundaryMap::chained(j_count, storages);
        if trial % 2 == 1 {
            let groups = rng.gen_range(1..=2 * storages * j_count);
            let mut element_of: Vec<Vec<usize>> = (0..j_count)
                .map(|_| (0..2 * storages).map(|_| rng.gen_range(0..groups)).collect())
                .collect();
            let flat: Vec<(usize, usize)> = (0..j_count)
                .flat_map(|j| (0..2 * storages).map(move |i| (j, i)))
                .collect();
            for g in 0..groups.min(flat.len()) {
                let (j, i) = flat[g];
                element_of[j][i] = g;
            }
            map = BoundaryMap {
                storages,
                groups: groups.min(flat.len()),
                element_of,
            };
        }
        let xb: Vec<Vec<f64>> = map
            .element_of
            .iter()
            .map(|e| e.iter().map(|_| rng.gen_range(0.0..5.0)).collect())
            .collect();
        let vb: Vec<Vec<f64>> = map
            .element_of
            .iter()
            .map(|e| e.iter().map(|_| rng.gen_range(-4.0..4.0)).collect())
            .collect();
        let mut b = QpBuilder::new(map.groups);
        for (j, e) in map.element_of.iter().enumerate() {
            for (i, &g) in e.iter().enumerate() {
                b.add_quadratic(g, g, rho);
                b.add_linear(g, -(vb[j][i] + rho * xb[j][i]));
            }
        }
        let r = solve_ipm(&b.build(), &settings).map_err(|e| e.to_string())?;
        if r.status != Status::Optimal {
            return Err(format!("boundary trial {trial}: QP status {:?}", r.status));
        }
        let xr: Vec<&[f64]> = xb.iter().map(|v| v.as_slice()).collect();
        let vr: Vec<&[f64]> = vb.iter().map(|v| v.as_slice()).collect();
        let closed = z_update_boundary(&xr, &vr, rho, &map).map_err(|e| e.to_string())?;
        worst = worst.max(closed.iter().zip(&r.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let detail = format!("200 design and 200 boundary trials, worst difference {worst:.1e}");
    if worst <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixed_point_termination() -> Verdict {
    let problem = oracle_problem();
    let mut state = AdmmState::initial(&problem.system, &problem.map, 1.0);
    state.z.design = vec![1.5, 2.0, 0.5];
    state.z.boundary = vec![0.3, 0.7, 0.2];
    for j in 0..state.x.len() {
        state.x[j] = state.z_tilde(j);
        state.v[j] = state.x[j].iter().map(|x| x * 0.25 - 0.1).collect();
    }
    state.z_prev = Some(state.z.clone());
    state.k = 7;
    let (r_p, r_d) = residuals(&state);
    let conv = convergence(&state, 1e-5, 1e-4);
    let out = run_from(&problem, &AdmmConfig::default(), state).map_err(|e| e.to_string())?;
    let detail = format!(
        "residuals ({r_p}, {r_d}), stacked ({}, {}), status {:?}, k {} -> {}",
        conv.primal, conv.dual, out.status, 7, out.state.k
    );
    if r_p == 0.0
        && r_d == 0.0
        && conv.primal == 0.0
        && conv.dual == 0.0
        && out.status == AdmmStatus::Converged
        && out.state.k == 7
        && out.trace.is_empty()
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn boundary_stitching() -> Verdict {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, problem) in [
        ("oracle", oracle_problem()),
        ("random 4-scenario", random_problem(77, 4, 6, 2)),
    ] {
        let out = run(&problem, &AdmmConfig::default()).map_err(|e| e.to_string())?;
        let gap = junction_gap(&out);
        let limit = 10.0 * out.convergence.eps_primal;
        ok &= out.status == AdmmStatus::Converged && gap <= limit;
        lines.push(format!("{name}: {:?}, gap {gap:.1e} <= {limit:.1e}", out.status));
    }
    if ok {
        Ok(lines.join("; "))
    } else {
        Err(lines.join("; "))
    }
}

fn scenario_count_formula() -> Verdict {
    // 2N/α·ln(2/α) + 2/α·ln(1/ε) + 2N, evaluated term by term.
    let bound = |n: f64, a: f64, e: f64| {
        let t1 = 2.0 * n / a * (2.0 / a).ln();
        let t2 = 2.0 / a * (1.0 / e).ln();
        (t1 + t2 + 2.0 * n).ceil() as usize
    };
    let cases = [(1usize, 0.5, 0.5, 11usize), (6, 0.05, 0.01, 1082)];
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, a, e, expected) in cases {
        let lib = required_scenario_count(&ChanceConfig {
            alpha: a,
            epsilon: e,
            n_design: n,
        })
        .map_err(|e| e.to_string())?;
        let cli = scenario_count(a, e, n).map_err(|e| e.to_string())?;
        let independent = bound(n as f64, a, e);
        ok &= lib == expected && cli == expected && independent == expected;
        parts.push(format!("(N={n}, α={a}, ε={e}) -> {lib} (independent {independent})"));
    }
    if ok {
        Ok(parts.join(", "))
    } else {
        Err(parts.join(", "))
    }
}

fn monotone_sweep() -> Verdict {
    let cfg = RunConfig::read(&fixture_config()).map_err(|e| e.to_string())?;
    let grid = [0.2, 0.4, 0.6, 0.8, 1.0];
    let t0 = Instant::now();
    let points = sweep_rdc(&cfg, &grid).map_err(|e| e.to_string())?;
    let mut costs = Vec::new();
    for p in &points {
        match (p.total_cost, p.status.as_str()) {
            (Some(c), "converged") => costs.push(c),
            _ => return Err(format!("r_dc {} ended with status {}", p.r_dc, p.status)),
        }
    }
    let monotone = costs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-4));
    let detail = format!(
        "total cost (M$) {} over r_dc {:?}, {:.0} s",
        costs
            .iter()
            .map(|c| format!("{:.5}", c / 1e6))
            .collect::<Vec<_>>()
            .join(" > "),
        grid,
        t0.elapsed().as_secs_f64()
    );
    if monotone {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ingestion_formulas() -> Verdict {
    let wind = WindConfig {
        air_density: 1.225,
        rotor_diameter: 80.0,
        turbine_efficiency: 0.5,
        v_in: 3.0,
        v_rated: 10.0,
        v_out: 20.0,
    };
    let below = f64::from_bits(wind.v_rated.to_bits() - 1);
    let left = wind_power(below, &wind);
    let right = wind_power(wind.v_rated, &wind);
    let continuity = (left - right).abs();
    let outside = [0.0, 1.0, 2.999_999, 20.000_001, 25.0, 60.0];
    let zero_outside = outside.iter().all(|&v| wind_power(v, &wind) == 0.0);

    // (μ, R_n, θ_t, θ_l, rated, expected)
    let table = [
        (0.2, 0.0, 30.0, 30.0, 150.0, 0.0),
        (0.2, 1000.0, 30.0, 30.0, 150.0, 1.0),
        (0.2, 500.0, 25.841_932_763_167_15, 0.0, 150.0, 0.6),
        (0.2, 600.0, 60.0, 0.0, 150.0, 0.4),
        (0.15, 800.0, 10.0, 10.0, 150.0, 0.8),
        (0.2, 1200.0, 35.0, 35.0, 150.0, 1.0),
        (0.2, 900.0, 45.0, 0.0, 150.0, 0.848_528_137_423_857),
        (0.1, 300.0, 20.0, 20.0, 200.0, 0.15),
        (0.2, 700.0, 150.0, 30.0, 150.0, 0.0),
        (0.25, 400.0, 0.0, 0.0, 100.0, 1.0),
    ];
    let mut solar_err = 0.0_f64;
    let mut solar_max = 0.0_f64;
    for &(mu, rn, tilt, site, rated, expected) in &table {
        let cfg = SolarConfig {
            panel_efficiency: mu,
            rated_output: rated,
            tilt_angle: tilt,
            seasonal_tilt: None,
            site_angle: site,
        };
        let got = solar_power(rn, &cfg);
        solar_err = solar_err.max((got - expected).abs());
        solar_max = solar_max.max(got);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..2000 {
        let cfg = SolarConfig {
            panel_efficiency: rng.gen_range(0.01..1.0),
            rated_output: rng.gen_range(10.0..400.0),
            tilt_angle: rng.gen_range(-90.0..90.0),
            seasonal_tilt: None,
            site_angle: rng.gen_range(-180.0..180.0),
        };
        solar_max = solar_max.max(solar_power(rng.gen_range(0.0..1500.0), &cfg));
    }

    let mut mean_err = 0.0_f64;
    for len in [1, 7, 24, 168, 8760] {
        let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.1..1000.0)).collect();
        let norm = normalize_load(&raw).map_err(|e| e.to_string())?;
        let mean = norm.iter().sum::<f64>() / len as f64;
        mean_err = mean_err.max((mean - 1.0).abs());
    }

    let detail = format!(
        "wind |left-right| {continuity:.1e}, zero outside cut-in/out {zero_outside}, solar table error {solar_err:.1e}, solar max {solar_max}, load mean error {mean_err:.1e}"
    );
    if continuity <= 1e-12 && zero_outside && solar_err <= 1e-12 && solar_max <= 1.0 && mean_err <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn plan_into(dir: &Path) -> Result<gridplan_cli::PlanRun, String> {
    let mut cfg = RunConfig::read(&fixture_config()).map_err(|e| e.to_string())?;
    cfg.output_dir = dir.to_path_buf();
    plan(&cfg).map_err(|e| e.to_string())
}

fn feasibility_audit(fixture: &gridplan_cli::PlanRun) -> Verdict {
    let mut failures = Vec::new();
    let mut audited = 0;
    let mut problems = vec![oracle_problem(), random_problem(77, 4, 6, 2)];
    problems.extend((0..6).map(|s| random_problem(500 + s, 3, 5, 1 + s as usize % 2)));
    for (i, p) in problems.iter().enumerate() {
        let out = run(p, &AdmmConfig::default()).map_err(|e| e.to_string())?;
        if out.status == AdmmStatus::Converged {
            audited += 1;
            failures.extend(
                feasibility_failures(p, &out, 1e-5)
                    .into_iter()
                    .map(|f| format!("instance {i}: {f}")),
            );
        }
    }
    if fixture.outcome.status == AdmmStatus::Converged {
        audited += 1;
        failures.extend(
            feasibility_failures(&fixture.problem, &fixture.outcome, 1e-5)
                .into_iter()
                .map(|f| format!("fixture: {f}")),
        );
    }
    if audited < 2 {
        return Err(format!("only {audited} converged plans to audit"));
    }
    if failures.is_empty() {
        Ok(format!("{audited} converged plans, all scenarios feasible at 1e-5"))
    } else {
        Err(failures.join("; "))
    }
}

fn determinism(a: &Path, b: &Path) -> Verdict {
    let mut names = Vec::new();
    for name in ["capacities.csv", "summary.csv", "trace.csv", "shortage.csv"] {
        let x = std::fs::read(a.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let y = std::fs::read(b.join(name)).map_err(|e| format!("{name}: {e}"))?;
        if x != y {
            return Err(format!("{name} differs between runs"));
        }
        names.push(format!("{name} ({} bytes)", x.len()));
    }
    Ok(format!("identical: {}", names.join(", ")))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let (dir_a, dir_b) = (tmp.path().join("a"), tmp.path().join("b"));
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    let mut record = |name: &'static str, verdict: Verdict| {
        let (label, text) = match &verdict {
            Ok(t) => ("PASS", t),
            Err(t) => ("FAIL", t),
        };
        println!("criterion {:>2} {name:<28} {label}  {text}", results.len() + 1);
        results.push((name, verdict));
    };

    record("oracle equivalence", oracle_equivalence());
    record("complementarity", complementarity());
    record("closed-form z-updates", closed_form_z_updates());
    record("fixed-point termination", fixed_point_termination());
    record("boundary stitching", boundary_stitching());
    record("scenario-count formula", scenario_count_formula());
    record("monotone r_dc sweep", monotone_sweep());
    record("ingestion formulas", ingestion_formulas());
    let first = plan_into(&dir_a);
    let audit = match &first {
        Ok(run) => feasibility_audit(run),
        Err(e) => Err(format!("fixture plan failed: {e}")),
    };
    record("feasibility audit", audit);
    let repeat = first
        .and_then(|_| plan_into(&dir_b))
        .and_then(|_| determinism(&dir_a, &dir_b));
    record("determinism", repeat);

    let failed = results.iter().filter(|(_, v)| v.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
