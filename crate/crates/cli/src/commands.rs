//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use ose_core::auth::{self, AuthDecision, ReferenceStore, Verdict};
use ose_core::correlation::{
    export_heatmap, match_with_rotation_map, rotate_image, Correlator, HeatmapFormat, ShiftRange,
};
use ose_core::experiment::{pair_matrix, DeskSetup, PairMatrixCheck};
use ose_core::io::{read_heightmap, read_image, read_pattern, sidecar_path, write_heightmap, write_json, write_pattern};
use ose_core::optics::{
    expected_speckle_diameter, measured_speckle_diameter, simulate_hologram_copy, simulate_speckle, OpticalConfig,
};
use ose_core::surface::{
    generate_surface, make_replica_with, occlude, Fill, HeightMap, Region, ReplicaParams, SurfaceParams,
};
use ose_core::{OseError, Result};
use serde_json::{json, Value};

use crate::{
    CalibrateArgs, ChallengeArgs, Command, CorrelateArgs, EnrollArgs, FillKind, GenSurfaceArgs, HeatmapArgs,
    ManifestPlace, MapFormat, OccludeArgs, Outcome, ReplicateArgs, ReproArgs, SimulateArgs, SpeckleSizeArgs,
    VerifyArgs, EXIT_COUNTERFEIT, EXIT_INCONCLUSIVE, EXIT_INTERNAL, EXIT_OK,
};

pub(crate) fn execute(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::GenSurface(a) => gen_surface(a),
        Command::Replicate(a) => replicate(a),
        Command::Occlude(a) => occlude_cmd(a),
        Command::Simulate(a) => simulate(a),
        Command::SpeckleSize(a) => speckle_size(a),
        Command::Correlate(a) => correlate(a),
        Command::Heatmap(a) => heatmap(a),
        Command::Enroll(a) => enroll(a),
        Command::Verify(a) => verify(a),
        Command::Challenge(a) => challenge(a),
        Command::Calibrate(a) => calibrate(a),
        Command::ReproTable1(a) => repro_table1(a),
    }
}

impl Outcome {
    fn new(result: Value, text: String, place: ManifestPlace) -> Self {
        Self {
            result,
            text,
            code: EXIT_OK,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seeds: Vec::new(),
            place,
        }
    }

    fn inputs(mut self, paths: &[&Path]) -> Self {
        self.inputs = paths.iter().map(|p| p.to_path_buf()).collect();
        self
    }

    fn outputs(mut self, paths: &[&Path]) -> Self {
        self.outputs = paths.iter().map(|p| p.to_path_buf()).collect();
        self
    }

    fn seeds(mut self, seeds: &[u64]) -> Self {
        self.seeds = seeds.to_vec();
        self
    }
}

/// Writes the result to `out` when given; without it the manifest goes to stdout.
fn result_place(result: &Value, out: Option<&PathBuf>) -> Result<(ManifestPlace, Vec<PathBuf>)> {
    match out {
        Some(path) => {
            write_json(path, result)?;
            Ok((ManifestPlace::Beside(path.clone()), vec![path.clone()]))
        }
        None => Ok((ManifestPlace::Stdout, Vec::new())),
    }
}

fn map_summary(map: &HeightMap) -> Value {
    json!({ "nx": map.nx(), "ny": map.ny(), "pitch_m": map.pitch(), "rms_m": map.rms() })
}

fn gen_surface(a: &GenSurfaceArgs) -> Result<Outcome> {
    let params = SurfaceParams::new(a.surface.sigma, a.surface.corr_len, a.seed);
    let map = generate_surface(&params, a.grid.nx, a.grid.ny, a.grid.pitch)?;
    write_heightmap(&a.out, &map)?;
    let text = format!("wrote {} ({}x{}, rms {:.1} nm)", a.out.display(), map.nx(), map.ny(), map.rms() * 1e9);
    Ok(Outcome::new(map_summary(&map), text, ManifestPlace::Beside(a.out.clone()))
        .outputs(&[&a.out])
        .seeds(&[a.seed]))
}

fn replicate(a: &ReplicateArgs) -> Result<Outcome> {
    let master = read_heightmap(&a.master)?;
    let mut params = ReplicaParams::new(a.error, a.seed);
    if let Some(len) = a.error_corr_len {
        params = params.with_corr_len(len);
    }
    let corr_len = params.resolved_corr_len(&master);
    let replica = make_replica_with(&master, &params)?;
    write_heightmap(&a.out, &replica)?;
    let mut result = map_summary(&replica);
    result["error_corr_len_m"] = json!(corr_len);
    let text = format!(
        "wrote {} (error rms {:.1} nm, error corr len {:.1} um)",
        a.out.display(),
        a.error * 1e9,
        corr_len * 1e6
    );
    Ok(Outcome::new(result, text, ManifestPlace::Beside(a.out.clone()))
        .inputs(&[&a.master])
        .outputs(&[&a.out])
        .seeds(&[a.seed]))
}

fn occlude_cmd(a: &OccludeArgs) -> Result<Outcome> {
    let map = read_heightmap(&a.input)?;
    let region = match (&a.rect, a.fraction) {
        (Some(r), None) => Region::Rect {
            x0: r[0],
            y0: r[1],
            width: r[2],
            height: r[3],
        },
        (None, Some(fraction)) => Region::Fraction { fraction },
        _ => return Err(OseError::InvalidArgument("give exactly one of --rect or --fraction".into())),
    };
    let (fill, seeds) = match a.fill {
        FillKind::Flat => (Fill::Flat, vec![]),
        FillKind::Random => (
            Fill::Random {
                params: SurfaceParams::new(a.surface.sigma, a.surface.corr_len, a.fill_seed),
            },
            vec![a.fill_seed],
        ),
    };
    let damaged = occlude(&map, region, fill)?;
    write_heightmap(&a.out, &damaged)?;
    let text = format!("wrote {}", a.out.display());
    Ok(Outcome::new(map_summary(&damaged), text, ManifestPlace::Beside(a.out.clone()))
        .inputs(&[&a.input])
        .outputs(&[&a.out])
        .seeds(&seeds))
}

fn simulate(a: &SimulateArgs) -> Result<Outcome> {
    let map = read_heightmap(&a.surface)?;
    let config = a.optics.config();
    let pattern = match a.hologram_lambda {
        Some(lambda) => {
            let recorded = config.with_lambda(lambda).with_theta(a.hologram_theta.unwrap_or(config.theta_inc));
            simulate_hologram_copy(&map, &recorded, &config, a.noise_seed)?
        }
        None => simulate_speckle(&map, &config, a.noise_seed)?,
    };
    write_pattern(&a.out, &pattern, &config)?;
    let sidecar = sidecar_path(&a.out);
    let result = json!({
        "width": pattern.width(),
        "height": pattern.height(),
        "bit_depth": pattern.bit_depth(),
        "fingerprint": pattern.config_fingerprint(),
    });
    let text = format!("wrote {} and {}", a.out.display(), sidecar.display());
    Ok(Outcome::new(result, text, ManifestPlace::Beside(a.out.clone()))
        .inputs(&[&a.surface])
        .outputs(&[&a.out, &sidecar])
        .seeds(&[a.noise_seed]))
}

fn speckle_size(a: &SpeckleSizeArgs) -> Result<Outcome> {
    let (config, measured) = match &a.pattern {
        Some(p) => {
            let (pattern, config) = read_pattern(p)?;
            (config, Some(measured_speckle_diameter(&pattern)?))
        }
        None => {
            let config = a.optics.config();
            config.validate()?;
            (config, None)
        }
    };
    let expected_m = expected_speckle_diameter(&config);
    let expected_px = expected_m / config.sensor.px_pitch;
    let mut result = json!({ "expected_m": expected_m, "expected_px": expected_px });
    let mut text = format!("expected {:.2} um = {:.2} px", expected_m * 1e6, expected_px);
    if let Some(m) = measured {
        result["measured_px"] = json!(m);
        result["ratio"] = json!(m / expected_px);
        text.push_str(&format!("\nmeasured {m:.2} px (ratio {:.3})", m / expected_px));
    }
    let (place, outputs) = result_place(&result, a.out.as_ref())?;
    let mut outcome = Outcome::new(result, text, place);
    outcome.outputs = outputs;
    if let Some(p) = &a.pattern {
        outcome.inputs = vec![p.clone(), sidecar_path(p)];
    }
    Ok(outcome)
}

fn format_for(path: &Path, explicit: Option<MapFormat>) -> HeatmapFormat {
    match explicit {
        Some(MapFormat::Png) => HeatmapFormat::Png,
        Some(MapFormat::Csv) => HeatmapFormat::Csv,
        None => match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("png") => HeatmapFormat::Png,
            _ => HeatmapFormat::Csv,
        },
    }
}

fn correlate(a: &CorrelateArgs) -> Result<Outcome> {
    let pa = read_image(&a.a)?.to_f64();
    let pb = read_image(&a.b)?.to_f64();
    let (res, map) = match_with_rotation_map(pa.view(), pb.view(), &a.search.search())?;
    let mut result = serde_json::to_value(res).expect("result serializes");
    result["rotation_deg"] = json!(res.rotation.to_degrees());
    result["peak_snr"] = json!(res.peak_snr());
    let mut written = Vec::new();
    if let Some(h) = &a.heatmap {
        export_heatmap(&map, h, format_for(h, None))?;
        written.push(h.clone());
        written.push(sidecar_path(h));
    }
    let text = format!(
        "peak {:.4} at dx={} dy={} rotation={:.3} deg",
        res.peak,
        res.dx,
        res.dy,
        res.rotation.to_degrees()
    );
    let (place, outputs) = result_place(&result, a.out.as_ref())?;
    written.extend(outputs);
    let mut outcome = Outcome::new(result, text, place).inputs(&[&a.a, &a.b]);
    outcome.outputs = written;
    Ok(outcome)
}

fn heatmap(a: &HeatmapArgs) -> Result<Outcome> {
    let pa = read_image(&a.a)?.to_f64();
    let pb = read_image(&a.b)?.to_f64();
    if pa.dim() != pb.dim() {
        return Err(OseError::InvalidArgument(format!(
            "image sizes differ: {:?} vs {:?}",
            pa.dim(),
            pb.dim()
        )));
    }
    let correlator = Correlator::new(pa.view(), ShiftRange::square(a.max_shift))?;
    let map = if a.rotation == 0.0 {
        correlator.correlate(pb.view(), None, 0.0)?
    } else {
        let (rotated, mask) = rotate_image(pb.view(), -a.rotation);
        correlator.correlate(rotated.view(), Some(mask.view()), a.rotation)?
    };
    let sidecar = export_heatmap(&map, &a.out, format_for(&a.out, a.format))?;
    let side = sidecar_path(&a.out);
    let result = serde_json::to_value(&sidecar).expect("sidecar serializes");
    let text = format!(
        "wrote {} (values {:.4} .. {:.4})",
        a.out.display(),
        sidecar.scale_min,
        sidecar.scale_max
    );
    Ok(Outcome::new(result, text, ManifestPlace::Beside(a.out.clone()))
        .inputs(&[&a.a, &a.b])
        .outputs(&[&a.out, &side]))
}

fn enroll(a: &EnrollArgs) -> Result<Outcome> {
    let entries = a.patterns.iter().map(|p| read_pattern(p)).collect::<Result<Vec<_>>>()?;
    let created_at = match &a.created_at {
        Some(s) => DateTime::parse_from_rfc3339(s)
            .map_err(|e| OseError::InvalidArgument(format!("--created-at {s:?}: {e}")))?
            .with_timezone(&Utc),
        None => Utc::now(),
    };
    fs::create_dir_all(&a.store).map_err(|e| OseError::Io {
        path: a.store.clone(),
        source: e,
    })?;
    let store = ReferenceStore::open(&a.store)?;
    let record = store.enroll_at(&a.id, entries, created_at)?;
    let dir = a.store.join(&record.id);
    let result = json!({
        "id": record.id,
        "entries": record.entries.len(),
        "created_at": record.created_at.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        "content_hash": record.content_hash,
    });
    let text = format!("enrolled {} ({} entries, hash {})", record.id, record.entries.len(), record.content_hash);
    let mut inputs = Vec::new();
    for p in &a.patterns {
        inputs.push(p.clone());
        inputs.push(sidecar_path(p));
    }
    let mut outcome = Outcome::new(result, text, ManifestPlace::Beside(dir.clone())).outputs(&[&dir]);
    outcome.inputs = inputs;
    Ok(outcome)
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Genuine => EXIT_OK,
        Verdict::Counterfeit => EXIT_COUNTERFEIT,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn decision_outcome(decision: &AuthDecision, out: Option<&PathBuf>, probes: &[PathBuf], store: &Path, id: &str) -> Result<Outcome> {
    let result = serde_json::to_value(decision).expect("decision serializes");
    let verdict = serde_json::to_value(decision.verdict).expect("verdict serializes");
    let scores: Vec<String> = decision.scores.iter().map(|s| format!("{:.4}", s.result.peak)).collect();
    let text = format!(
        "{} (scores {}, threshold {})",
        verdict.as_str().unwrap_or_default(),
        scores.join(", "),
        decision.threshold
    );
    let (place, outputs) = result_place(&result, out)?;
    let mut inputs = vec![store.join(id)];
    for p in probes {
        inputs.push(p.clone());
        inputs.push(sidecar_path(p));
    }
    let mut outcome = Outcome::new(result, text, place);
    outcome.code = verdict_code(decision.verdict);
    outcome.inputs = inputs;
    outcome.outputs = outputs;
    Ok(outcome)
}

fn verify(a: &VerifyArgs) -> Result<Outcome> {
    let store = ReferenceStore::open(&a.store)?;
    let (pattern, config) = read_pattern(&a.pattern)?;
    let decision = auth::verify(&store, &a.id, &pattern, &config, a.threshold, &a.search.search())?;
    decision_outcome(&decision, a.out.as_ref(), std::slice::from_ref(&a.pattern), &a.store, &a.id)
}

fn challenge(a: &ChallengeArgs) -> Result<Outcome> {
    let store = ReferenceStore::open(&a.store)?;
    let probes: Vec<(_, OpticalConfig)> = a.patterns.iter().map(|p| read_pattern(p)).collect::<Result<_>>()?;
    let decision = auth::challenge_verify(&store, &a.id, &probes, a.threshold, &a.search.search())?;
    decision_outcome(&decision, a.out.as_ref(), &a.patterns, &a.store, &a.id)
}

fn calibrate(a: &CalibrateArgs) -> Result<Outcome> {
    let cal = auth::calibrate_threshold(&a.genuine, &a.impostor)?;
    let result = serde_json::to_value(cal).expect("calibration serializes");
    let text = format!("threshold {:.6} (margin {:.6})", cal.threshold, cal.margin);
    let (place, outputs) = result_place(&result, a.out.as_ref())?;
    let mut outcome = Outcome::new(result, text, place);
    outcome.outputs = outputs;
    Ok(outcome)
}

fn repro_table1(a: &ReproArgs) -> Result<Outcome> {
    if a.seeds.is_empty() {
        return Err(OseError::InvalidArgument("--seeds needs at least one seed set".into()));
    }
    let setup = DeskSetup {
        nx: a.grid.nx,
        ny: a.grid.ny,
        pitch: a.grid.pitch,
        sigma_h: a.surface.sigma,
        corr_len: a.surface.corr_len,
        config: a.optics.config(),
        search: a.search.search(),
    };
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |e| OseError::Io { path, source: e }
    };
    fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;

    let mut runs = Vec::new();
    let mut lines = Vec::new();
    let mut all_pass = true;
    for &seed_set in &a.seeds {
        let t = pair_matrix(&setup, a.error, seed_set)?;
        let dir = a.out.join(format!("seed-{seed_set}"));
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let csv = dir.join("matrix.csv");
        fs::write(&csv, t.to_csv()).map_err(io_err(&csv))?;
        for (name, map) in [("same_surface", &t.same_surface), ("cross_surface", &t.cross_surface)] {
            export_heatmap(map, &dir.join(format!("{name}.png")), HeatmapFormat::Png)?;
            export_heatmap(map, &dir.join(format!("{name}.csv")), HeatmapFormat::Csv)?;
        }
        let check: PairMatrixCheck = t.check();
        all_pass &= check.pass;
        lines.push(format!(
            "seed set {seed_set}: {} (diagonal min {:.6}, same-master min {:.4}, cross-master max {:.4})",
            if check.pass { "PASS" } else { "FAIL" },
            check.diagonal_min,
            check.same_master_min,
            check.cross_master_max
        ));
        runs.push(json!({
            "seed_set": seed_set,
            "labels": t.labels,
            "matrix": t.matrix,
            "check": check,
        }));
    }
    let report = a.out.join("report.json");
    let result = json!({
        "setup": setup,
        "error_rms_m": a.error,
        "same_master_min_required": ose_core::experiment::SAME_MASTER_MIN,
        "cross_master_max_allowed": ose_core::experiment::CROSS_MASTER_MAX,
        "runs": runs,
        "pass": all_pass,
    });
    write_json(&report, &result)?;
    lines.push(if all_pass { "PASS".into() } else { "FAIL".into() });
    let mut outcome = Outcome::new(result, lines.join("\n"), ManifestPlace::Beside(report.clone()))
        .outputs(&[&a.out])
        .seeds(&a.seeds);
    if !all_pass {
        outcome.code = EXIT_INTERNAL;
    }
    Ok(outcome)
}
