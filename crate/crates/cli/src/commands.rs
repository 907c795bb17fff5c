use std::fs;
use std::path::Path;

use rotcon::channel::{ber_monte_carlo, BerOptions, BerReport, RNG_ALGORITHM};
use rotcon::constellation::{
    make_nuqam, make_qam_product, normalize_unit_bit_energy, rotate, Constellation, NuqamParams,
};
use rotcon::fmt::g17;
use rotcon::liegroup::{
    logm_rotation, matrix_to_csv, read_matrix_csv, rotation_at, skew_family, DescentOptions,
    RotationMatrix, MAX_LOG2_DIM,
};
use rotcon::metrics::{cutoff_rate, metrics_report, ChannelSpec, Radius, COORDINATE_TOL};
use rotcon::optimize::{
    default_initial_rotation, grid_search_t, grid_search_t_profile, optimize_nuqam,
    optimize_rotation_full, standard_qam_energy, NuqamOptions,
};
use serde_json::{json, Value};

use crate::args::{
    BerArgs, Cli, Command, FamilyArgs, Format, Global, GenArgs, MetricsArgs, Mode, OptNuqamArgs,
    OptRotationArgs, Rotation, Source, Start, SweepArgs,
};
use crate::Failure;

type Outcome = Result<(), Failure>;

struct Ctx {
    global: Global,
    argv: Vec<String>,
}

pub fn run(cli: Cli) -> Outcome {
    let ctx = Ctx {
        global: cli.global,
        argv: std::env::args().collect(),
    };
    match cli.command {
        Command::Family(a) => family(&ctx, &a),
        Command::Metrics(a) => metrics(&ctx, &a),
        Command::OptRotation(a) => opt_rotation(&ctx, &a),
        Command::OptNuqam(a) => opt_nuqam(&ctx, &a),
        Command::Sweep(a) => sweep(&ctx, &a),
        Command::Ber(a) => ber(&ctx, &a),
        Command::Gen(a) => gen(&ctx, &a),
    }
}

impl Ctx {
    fn provenance(&self) -> Value {
        json!({
            "command_line": self.argv,
            "seed": self.global.seed,
            "version": rotcon::VERSION,
            "rng": RNG_ALGORITHM,
        })
    }

    fn emit(&self, text: &str) -> Outcome {
        match &self.global.out {
            Some(path) => write_file(path, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn emit_json(&self, mut body: Value) -> Outcome {
        body["provenance"] = self.provenance();
        let mut text = serde_json::to_string_pretty(&body)
            .map_err(|e| Failure::Numerical(e.to_string()))?;
        text.push('\n');
        self.emit(&text)
    }

    fn channels(&self) -> Result<Vec<ChannelSpec>, Failure> {
        if self.global.ebn0_db.is_empty() {
            return Err(Failure::Usage("--ebn0-db is required for this command".into()));
        }
        self.global
            .ebn0_db
            .iter()
            .map(|&v| ChannelSpec::from_ebn0_db(v).map_err(|e| Failure::Usage(e.to_string())))
            .collect()
    }

    fn channel(&self) -> Result<ChannelSpec, Failure> {
        let mut chans = self.channels()?;
        if chans.len() != 1 {
            return Err(Failure::Usage(
                "this command takes a single --ebn0-db value; use sweep for lists".into(),
            ));
        }
        Ok(chans.remove(0))
    }

    fn grid_step(&self, default_rad: f64) -> Result<f64, Failure> {
        match self.global.grid_step_deg {
            None => Ok(default_rad),
            Some(d) if d > 0.0 && d <= 45.0 => Ok(d.to_radians()),
            Some(d) => Err(Failure::Usage(format!(
                "--grid-step-deg must lie in (0, 45], got {d}"
            ))),
        }
    }
}

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text)
        .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

fn load_source(s: &Source) -> Result<Constellation, Failure> {
    let x = if let Some(order) = s.qam {
        make_qam_product(order, s.pairs)?
    } else if let Some(levels) = &s.nuqam {
        make_nuqam(&NuqamParams::new(levels.clone())?)?
    } else if let Some(path) = &s.input {
        Constellation::load(path)?
    } else {
        return Err(Failure::Usage("one of --qam, --nuqam or --input is required".into()));
    };
    if s.keep_energy {
        Ok(x)
    } else {
        Ok(normalize_unit_bit_energy(&x)?)
    }
}

fn family_exponent(n: usize) -> Result<u32, Failure> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Failure::Input(format!(
            "the rotation family needs a power-of-two dimension, got {n}"
        )));
    }
    Ok(n.trailing_zeros())
}

fn load_rotation(path: &Path, n: usize) -> Result<RotationMatrix, Failure> {
    let q = RotationMatrix::new(read_matrix_csv(path)?)?;
    if q.dim() != n {
        return Err(Failure::Input(format!(
            "{} is {}x{}, the constellation has dimension {n}",
            path.display(),
            q.dim(),
            q.dim()
        )));
    }
    Ok(q)
}

/// The requested rotation and a short description of it.
fn resolve_rotation(r: &Rotation, n: usize) -> Result<Option<(RotationMatrix, Value)>, Failure> {
    if let Some(path) = &r.rotation {
        let q = load_rotation(path, n)?;
        return Ok(Some((q, json!({ "file": path.display().to_string() }))));
    }
    if let Some(deg) = r.t_deg {
        let f = skew_family(family_exponent(n)?)?;
        return Ok(Some((rotation_at(&f, deg.to_radians()), json!({ "family_t_deg": deg }))));
    }
    Ok(None)
}

fn matrix_rows(q: &RotationMatrix) -> Vec<Vec<f64>> {
    (0..q.dim())
        .map(|i| (0..q.dim()).map(|j| q.get(i, j)).collect())
        .collect()
}

fn family(ctx: &Ctx, a: &FamilyArgs) -> Outcome {
    if !(1..=MAX_LOG2_DIM).contains(&a.k) {
        return Err(Failure::Usage(format!("--k must lie in 1..={MAX_LOG2_DIM}, got {}", a.k)));
    }
    let t = match (a.t, a.t_deg) {
        (Some(t), _) => t,
        (None, Some(d)) => d.to_radians(),
        (None, None) => return Err(Failure::Usage("--t or --t-deg is required".into())),
    };
    if !t.is_finite() {
        return Err(Failure::Usage("angle must be finite".into()));
    }
    let f = skew_family(a.k)?;
    let q = rotation_at(&f, t);
    let note = (a.k == 2 && (t - 0.56).abs() < 1e-12).then_some(
        "the transpose of this matrix is the 4D rotation used with 4-QAM in the DVB-NGH standard",
    );
    match ctx.global.format {
        Format::Csv => {
            let mut text = format!("# Q_{}(t), t = {} rad = {} deg\n", f.dim(), g17(t), g17(t.to_degrees()));
            if let Some(note) = note {
                text.push_str(&format!("# {note}\n"));
            }
            text.push_str(&matrix_to_csv(q.as_matrix()));
            ctx.emit(&text)
        }
        Format::Json => {
            let mut body = json!({
                "k": a.k,
                "n": f.dim(),
                "t_rad": t,
                "t_deg": t.to_degrees(),
                "matrix": matrix_rows(&q),
            });
            if let Some(note) = note {
                body["note"] = json!(note);
            }
            ctx.emit_json(body)
        }
    }
}

fn radii(g: &Global) -> Vec<Radius> {
    if g.radius.is_empty() {
        vec![Radius::Finite(2.0), Radius::Infinite]
    } else {
        g.radius.clone()
    }
}

fn metrics(ctx: &Ctx, a: &MetricsArgs) -> Outcome {
    let chans = ctx.channels()?;
    let mut x = load_source(&a.source)?;
    let rotation = resolve_rotation(&a.rotation, x.dim())?;
    if let Some((q, _)) = &rotation {
        x = rotate(&x, q)?;
    }
    let radii = radii(&ctx.global);
    let reports: Vec<_> = chans
        .iter()
        .map(|ch| metrics_report(&x, ch, &radii, COORDINATE_TOL))
        .collect();
    match ctx.global.format {
        Format::Csv => {
            let mut text = String::from(
                "ebn0_db,n0,cutoff_rate,high_snr_sum,radius,local_cutoff_rate,diversity_order,empty_ball,min_product_distance,normalized_product_distance\n",
            );
            for r in &reports {
                for b in &r.radii {
                    text.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{},{}\n",
                        r.channel.ebn0_db().map(g17).unwrap_or_default(),
                        g17(r.channel.n0()),
                        g17(r.cutoff_rate),
                        g17(r.high_snr_sum),
                        b.radius,
                        g17(b.local_cutoff_rate),
                        b.diversity_order.order,
                        b.diversity_order.empty_ball,
                        g17(b.min_product_distance.value),
                        g17(b.min_product_distance.normalized),
                    ));
                }
            }
            ctx.emit(&text)
        }
        Format::Json => ctx.emit_json(json!({
            "rotation": rotation.map(|(_, d)| d),
            "reports": reports,
        })),
    }
}

fn opt_rotation(ctx: &Ctx, a: &OptRotationArgs) -> Outcome {
    let ch = ctx.channel()?;
    let x = load_source(&a.source)?;
    let ebn0 = ch.ebn0_db().unwrap_or_default();
    match a.mode {
        Mode::Grid => {
            let step = ctx.grid_step(1e-4)?;
            let family = skew_family(family_exponent(x.dim())?)?;
            let r = if a.profile.is_some() {
                grid_search_t_profile(&x, &ch, step)?
            } else {
                grid_search_t(&x, &ch, step)?
            };
            if let (Some(path), Some(profile)) = (&a.profile, &r.profile) {
                let mut text = String::from("t_deg,R_bits\n");
                for (t, v) in profile {
                    text.push_str(&format!("{},{}\n", g17(t.to_degrees()), g17(*v)));
                }
                write_file(path, &text)?;
            }
            let q = rotation_at(&family, r.t_opt);
            eprintln!(
                "t_opt = {:.4} deg, R = {:.6} bits at {ebn0} dB",
                r.t_opt_deg(),
                r.objective
            );
            match ctx.global.format {
                Format::Csv => ctx.emit(&format!(
                    "# grid search at Eb/N0 = {} dB: t_opt = {} deg, R = {} bits\n{}",
                    g17(ebn0),
                    g17(r.t_opt_deg()),
                    g17(r.objective),
                    matrix_to_csv(q.as_matrix())
                )),
                Format::Json => ctx.emit_json(json!({
                    "mode": "grid",
                    "ebn0_db": ebn0,
                    "n0": ch.n0(),
                    "t_opt_deg": r.t_opt_deg(),
                    "grid_step_deg": step.to_degrees(),
                    "R_bits": r.objective,
                    "matrix": matrix_rows(&q),
                })),
            }
        }
        Mode::Manifold => {
            let q0 = match a.start {
                Start::Default => default_initial_rotation(x.dim())?,
                Start::Identity => RotationMatrix::identity(x.dim()),
            };
            if !(a.step > 0.0) || !(a.grad_tol > 0.0) {
                return Err(Failure::Usage("--step and --grad-tol must be positive".into()));
            }
            let opts = DescentOptions {
                step: a.step,
                max_iters: a.max_iters,
                grad_tol: a.grad_tol,
                ..DescentOptions::default()
            };
            let trace = optimize_rotation_full(&x, &ch, &q0, &opts)?;
            if let Some(path) = &a.profile {
                let mut text = String::from("iteration,R_bits,gradient_norm\n");
                for it in &trace.iterates {
                    text.push_str(&format!(
                        "{},{},{}\n",
                        it.iteration,
                        g17(-it.objective),
                        g17(it.gradient_norm)
                    ));
                }
                write_file(path, &text)?;
            }
            let q = trace.final_rotation();
            let rate = -trace.final_objective();
            eprintln!(
                "R = {rate:.6} bits after {} iterations ({})",
                trace.last().iteration,
                serde_json::to_value(trace.reason).map_err(|e| Failure::Numerical(e.to_string()))?
            );
            match ctx.global.format {
                Format::Csv => ctx.emit(&format!(
                    "# geodesic descent at Eb/N0 = {} dB: R = {} bits\n{}",
                    g17(ebn0),
                    g17(rate),
                    matrix_to_csv(q.as_matrix())
                )),
                Format::Json => {
                    let log = logm_rotation(q).ok().map(|s| {
                        let m = s.as_matrix();
                        (0..m.nrows())
                            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<f64>>())
                            .collect::<Vec<_>>()
                    });
                    ctx.emit_json(json!({
                        "mode": "manifold",
                        "ebn0_db": ebn0,
                        "n0": ch.n0(),
                        "R_bits": rate,
                        "iterations": trace.last().iteration,
                        "converged": trace.converged,
                        "reason": trace.reason,
                        "options": opts,
                        "matrix": matrix_rows(q),
                        "log": log,
                    }))
                }
            }
        }
    }
}

fn opt_nuqam(ctx: &Ctx, a: &OptNuqamArgs) -> Outcome {
    if ![4, 6, 8, 10].contains(&a.bits) {
        return Err(Failure::Usage(format!("--bits must be 4, 6, 8 or 10, got {}", a.bits)));
    }
    let ch = ctx.channel()?;
    let init = match &a.init {
        Some(levels) => NuqamParams::new(levels.clone())?,
        None => NuqamParams::uniform(1 << (a.bits / 2 - 1))?,
    };
    let opts = NuqamOptions {
        max_iters: a.max_iters,
        perturbed_starts: a.starts,
        seed: ctx.global.seed,
        ..NuqamOptions::default()
    };
    let r = optimize_nuqam(a.bits, &ch, &init, &opts)?;
    let alpha = r.alpha.alpha();
    let qam = r.alpha.with_energy(standard_qam_energy(a.bits))?;
    let ratio: Vec<f64> = alpha.iter().map(|v| v / alpha[0]).collect();
    eprintln!(
        "R = {:.6} bits, converged = {} after {} iterations",
        r.objective, r.converged, r.iterations
    );
    match ctx.global.format {
        Format::Csv => {
            let mut text = String::from("level,alpha,alpha_qam_energy,ratio\n");
            for i in 0..alpha.len() {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    i + 1,
                    g17(alpha[i]),
                    g17(qam.alpha()[i]),
                    g17(ratio[i])
                ));
            }
            ctx.emit(&text)
        }
        Format::Json => ctx.emit_json(json!({
            "bits": a.bits,
            "ebn0_db": ch.ebn0_db(),
            "n0": ch.n0(),
            "R_bits": r.objective,
            "converged": r.converged,
            "iterations": r.iterations,
            "gradient_norm": r.gradient_norm,
            "alpha": alpha,
            "alpha_qam_energy": qam.alpha(),
            "ratio": ratio,
            "options": opts,
        })),
    }
}

fn sweep(ctx: &Ctx, a: &SweepArgs) -> Outcome {
    let chans = ctx.channels()?;
    let x = load_source(&a.source)?;
    let step = ctx.grid_step(1e-3)?;
    family_exponent(x.dim())?;
    let compare = match &ctx.global.compare {
        Some(path) if !path.exists() => {
            eprintln!(
                "warning: comparison rotation {} not found; omitting delta_r_bits",
                path.display()
            );
            None
        }
        Some(path) => Some(rotate(&x, &load_rotation(path, x.dim())?)?),
        None => None,
    };
    let mut rows = Vec::with_capacity(chans.len());
    for ch in &chans {
        let r = grid_search_t(&x, ch, step)?;
        let delta = compare.as_ref().map(|y| r.objective - cutoff_rate(y, ch));
        rows.push((ch.ebn0_db().unwrap_or_default(), r.t_opt_deg(), r.objective, delta));
    }
    match ctx.global.format {
        Format::Csv => {
            let mut text = String::from("ebn0_db,t_opt_deg,R_bits");
            if compare.is_some() {
                text.push_str(",delta_r_bits");
            }
            text.push('\n');
            for (db, t, r, delta) in &rows {
                text.push_str(&format!("{},{},{}", g17(*db), g17(*t), g17(*r)));
                if let Some(d) = delta {
                    text.push_str(&format!(",{}", g17(*d)));
                }
                text.push('\n');
            }
            ctx.emit(&text)
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|(db, t, r, delta)| {
                    let mut row = json!({ "ebn0_db": db, "t_opt_deg": t, "R_bits": r });
                    if let Some(d) = delta {
                        row["delta_r_bits"] = json!(d);
                    }
                    row
                })
                .collect();
            ctx.emit_json(json!({
                "grid_step_deg": step.to_degrees(),
                "compare": ctx.global.compare.as_ref().filter(|_| compare.is_some()).map(|p| p.display().to_string()),
                "rows": rows,
            }))
        }
    }
}

fn ber(ctx: &Ctx, a: &BerArgs) -> Outcome {
    let chans = ctx.channels()?;
    let x = load_source(&a.source)?;
    let opts = BerOptions {
        min_bits: a.min_bits,
        seed: ctx.global.seed,
    };
    let (report, rotation) = if a.t_opt {
        let family = skew_family(family_exponent(x.dim())?)?;
        let step = ctx.grid_step(1e-3)?;
        let mut rows = Vec::with_capacity(chans.len());
        let mut angles = Vec::with_capacity(chans.len());
        for ch in &chans {
            let t = grid_search_t(&x, ch, step)?.t_opt;
            let y = rotate(&x, &rotation_at(&family, t))?;
            rows.extend(ber_monte_carlo(&y, std::slice::from_ref(ch), &opts)?.rows);
            angles.push(t.to_degrees());
        }
        let report = BerReport {
            rng: RNG_ALGORITHM.to_string(),
            rows,
        };
        (report, Some(json!({ "family_t_opt_deg": angles })))
    } else {
        match resolve_rotation(&a.rotation, x.dim())? {
            Some((q, desc)) => (ber_monte_carlo(&rotate(&x, &q)?, &chans, &opts)?, Some(desc)),
            None => (ber_monte_carlo(&x, &chans, &opts)?, None),
        }
    };
    match ctx.global.format {
        Format::Csv => ctx.emit(&report.to_csv()),
        Format::Json => ctx.emit_json(json!({
            "rotation": rotation,
            "report": report,
        })),
    }
}

fn gen(ctx: &Ctx, a: &GenArgs) -> Outcome {
    let x = load_source(&a.source)?;
    match ctx.global.format {
        Format::Csv => ctx.emit(&x.to_csv()),
        Format::Json => {
            let body: Value = serde_json::from_str(&x.to_json())
                .map_err(|e| Failure::Numerical(e.to_string()))?;
            ctx.emit_json(body)
        }
    }
}
