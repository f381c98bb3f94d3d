//! Enrollment store and verification decisions.
//!
//! A store is a directory with one subdirectory per enrolled id. Each holds
//! the reference patterns as 16-bit PNGs, one JSON capture-setup sidecar per
//! pattern, and `manifest.json` with the content hash. Enrollment writes into
//! a temporary directory and renames it into place.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::correlation::{match_with_rotation, CorrelationResult, RotationSearch};
use crate::error::{OseError, Result};
use crate::io::{read_json, read_pattern, sidecar_path, write_json, write_pattern};
use crate::optics::{OpticalConfig, SpecklePattern};

/// Decision threshold used when none has been calibrated.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Scores this far below the threshold are inconclusive rather than
/// counterfeit.
pub const INCONCLUSIVE_BAND: f64 = 0.05;

const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Genuine,
    Counterfeit,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Single,
    Challenge,
}

/// One scored comparison, keyed by the capture setup it used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub fingerprint: String,
    #[serde(flatten)]
    pub result: CorrelationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthDecision {
    pub verdict: Verdict,
    pub scores: Vec<Score>,
    pub threshold: f64,
    pub band: f64,
    pub protocol: Protocol,
}

impl AuthDecision {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Verdict over the required scores: genuine when every score reaches the
/// threshold, counterfeit when any falls more than `band` below it, and
/// inconclusive otherwise.
pub fn decide(scores: &[f64], threshold: f64, band: f64) -> Verdict {
    let worst = scores.iter().copied().fold(f64::INFINITY, f64::min);
    if worst >= threshold {
        Verdict::Genuine
    } else if worst < threshold - band {
        Verdict::Counterfeit
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    pub margin: f64,
}

/// Threshold halfway between the best impostor and the worst genuine score;
/// the margin is half the gap.
pub fn calibrate_threshold(genuine: &[f64], impostor: &[f64]) -> Result<Calibration> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(OseError::invalid("both score populations must be nonempty"));
    }
    if genuine.iter().chain(impostor).any(|v| !v.is_finite()) {
        return Err(OseError::invalid("scores must be finite"));
    }
    let min_genuine = genuine.iter().copied().fold(f64::INFINITY, f64::min);
    let max_impostor = impostor.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min_genuine <= max_impostor {
        return Err(OseError::NonSeparable {
            min_genuine,
            max_impostor,
        });
    }
    Ok(Calibration {
        threshold: (min_genuine + max_impostor) / 2.0,
        margin: (min_genuine - max_impostor) / 2.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEntry {
    pub pattern: SpecklePattern,
    pub config: OpticalConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRecord {
    pub id: String,
    pub entries: Vec<ReferenceEntry>,
    pub created_at: DateTime<Utc>,
    pub content_hash: String,
}

impl ReferenceRecord {
    pub fn entry_for(&self, fingerprint: &str) -> Option<&ReferenceEntry> {
        self.entries.iter().find(|e| e.config.fingerprint() == fingerprint)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub pattern_file: String,
    pub config_file: String,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub created_at: String,
    pub entries: Vec<ManifestEntry>,
    pub content_hash: String,
}

/// SHA-256 over every entry's fingerprint, dimensions, bit depth and raw
/// counts, in order.
pub fn content_hash(entries: &[ReferenceEntry]) -> String {
    let mut h = Sha256::new();
    h.update(b"ose-reference-v1");
    h.update((entries.len() as u64).to_le_bytes());
    for e in entries {
        let fp = e.config.fingerprint();
        h.update((fp.len() as u64).to_le_bytes());
        h.update(fp.as_bytes());
        h.update((e.pattern.width() as u64).to_le_bytes());
        h.update((e.pattern.height() as u64).to_le_bytes());
        h.update([e.pattern.bit_depth()]);
        for v in e.pattern.intensities().iter() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Directory-backed collection of reference records.
#[derive(Debug, Clone)]
pub struct ReferenceStore {
    root: PathBuf,
}

impl ReferenceStore {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| OseError::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Enrolled ids in lexicographic order.
    pub fn ids(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(|e| OseError::io(&self.root, e))? {
            let entry = entry.map_err(|e| OseError::io(&self.root, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !name.starts_with('.') && entry.path().join(MANIFEST).is_file() {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn enroll(&self, id: &str, entries: Vec<(SpecklePattern, OpticalConfig)>) -> Result<ReferenceRecord> {
        self.enroll_at(id, entries, Utc::now())
    }

    /// Enrolls with an explicit creation time. Re-enrolling identical content
    /// returns the existing record unchanged.
    pub fn enroll_at(
        &self,
        id: &str,
        entries: Vec<(SpecklePattern, OpticalConfig)>,
        created_at: DateTime<Utc>,
    ) -> Result<ReferenceRecord> {
        check_id(id)?;
        if entries.is_empty() {
            return Err(OseError::invalid("enrollment needs at least one entry"));
        }
        let mut seen = Vec::with_capacity(entries.len());
        let mut refs = Vec::with_capacity(entries.len());
        for (pattern, config) in entries {
            config.validate()?;
            let fp = config.fingerprint();
            if pattern.config_fingerprint() != fp {
                return Err(OseError::invalid(format!(
                    "pattern fingerprint {} does not match its config fingerprint {fp}",
                    pattern.config_fingerprint()
                )));
            }
            if seen.contains(&fp) {
                return Err(OseError::invalid(format!("duplicate config fingerprint {fp}")));
            }
            seen.push(fp);
            refs.push(ReferenceEntry { pattern, config });
        }
        let record = ReferenceRecord {
            id: id.to_string(),
            content_hash: content_hash(&refs),
            entries: refs,
            created_at: truncate_to_millis(created_at),
        };

        let dir = self.root.join(id);
        if dir.exists() {
            return self.reconcile(record);
        }
        let tmp = tempfile::Builder::new()
            .prefix(&format!(".tmp-{id}-"))
            .tempdir_in(&self.root)
            .map_err(|e| OseError::io(&self.root, e))?;
        write_record(tmp.path(), &record)?;
        let staged = tmp.keep();
        if let Err(e) = fs::rename(&staged, &dir) {
            let _ = fs::remove_dir_all(&staged);
            if dir.exists() {
                return self.reconcile(record);
            }
            return Err(OseError::io(&dir, e));
        }
        Ok(record)
    }

    fn reconcile(&self, record: ReferenceRecord) -> Result<ReferenceRecord> {
        let existing = self.load(&record.id)?;
        if existing.content_hash == record.content_hash {
            Ok(existing)
        } else {
            Err(OseError::Conflict(format!(
                "id {} is already enrolled with different content (hash {})",
                record.id, existing.content_hash
            )))
        }
    }

    pub fn load(&self, id: &str) -> Result<ReferenceRecord> {
        check_id(id)?;
        let dir = self.root.join(id);
        let manifest_path = dir.join(MANIFEST);
        if !manifest_path.is_file() {
            return Err(OseError::NotFound(format!("no enrolled id {id:?} in {}", self.root.display())));
        }
        let manifest: Manifest = read_json(&manifest_path)?;
        if manifest.id != id {
            return Err(OseError::format(&manifest_path, format!("manifest names id {:?}", manifest.id)));
        }
        let created_at = DateTime::parse_from_rfc3339(&manifest.created_at)
            .map_err(|e| OseError::format(&manifest_path, format!("created_at: {e}")))?
            .with_timezone(&Utc);
        let mut entries = Vec::with_capacity(manifest.entries.len());
        for m in &manifest.entries {
            let png = dir.join(&m.pattern_file);
            if sidecar_path(&png) != dir.join(&m.config_file) {
                return Err(OseError::format(&manifest_path, format!("config file {} is not the sidecar of {}", m.config_file, m.pattern_file)));
            }
            let (pattern, config) = read_pattern(&png)?;
            if config.fingerprint() != m.fingerprint {
                return Err(OseError::format(&png, format!("fingerprint differs from manifest entry {}", m.fingerprint)));
            }
            entries.push(ReferenceEntry { pattern, config });
        }
        if entries.is_empty() {
            return Err(OseError::format(&manifest_path, "record has no entries"));
        }
        let hash = content_hash(&entries);
        if hash != manifest.content_hash {
            return Err(OseError::format(&manifest_path, "content hash does not match the stored patterns"));
        }
        Ok(ReferenceRecord {
            id: manifest.id,
            entries,
            created_at,
            content_hash: hash,
        })
    }
}

fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(OseError::invalid(format!(
            "id {id:?} must be nonempty, use only ASCII letters, digits, '-', '_' or '.', and not start with '.'"
        )))
    }
}

fn truncate_to_millis(t: DateTime<Utc>) -> DateTime<Utc> {
    DateTime::from_timestamp_millis(t.timestamp_millis()).unwrap_or(t)
}

fn write_record(dir: &Path, record: &ReferenceRecord) -> Result<()> {
    let mut entries = Vec::with_capacity(record.entries.len());
    for (i, e) in record.entries.iter().enumerate() {
        let pattern_file = format!("entry-{i:03}.png");
        let png = dir.join(&pattern_file);
        write_pattern(&png, &e.pattern, &e.config)?;
        let config_file = sidecar_path(Path::new(&pattern_file)).to_string_lossy().into_owned();
        entries.push(ManifestEntry {
            pattern_file,
            config_file,
            fingerprint: e.config.fingerprint(),
        });
    }
    let manifest = Manifest {
        id: record.id.clone(),
        created_at: record.created_at.to_rfc3339_opts(SecondsFormat::Millis, true),
        entries,
        content_hash: record.content_hash.clone(),
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

fn score(entry: &ReferenceEntry, test: &SpecklePattern, search: &RotationSearch) -> Result<Score> {
    let reference: Array2<f64> = entry.pattern.to_f64();
    let probe = test.to_f64();
    let result = match_with_rotation(reference.view(), probe.view(), search)?;
    Ok(Score {
        fingerprint: entry.config.fingerprint(),
        result,
    })
}

fn check_probe(test: &SpecklePattern, config: &OpticalConfig) -> Result<String> {
    let fp = config.fingerprint();
    if !test.config_fingerprint().is_empty() && test.config_fingerprint() != fp {
        return Err(OseError::invalid(format!(
            "test pattern fingerprint {} does not match the stated config {fp}",
            test.config_fingerprint()
        )));
    }
    Ok(fp)
}

/// Compares `test` with the reference captured under the same setup.
pub fn verify_record(
    record: &ReferenceRecord,
    test: &SpecklePattern,
    config: &OpticalConfig,
    threshold: f64,
    search: &RotationSearch,
) -> Result<AuthDecision> {
    let fp = check_probe(test, config)?;
    let entry = record
        .entry_for(&fp)
        .ok_or_else(|| OseError::NotFound(format!("id {:?} has no reference for config {fp}", record.id)))?;
    let s = score(entry, test, search)?;
    Ok(AuthDecision {
        verdict: decide(&[s.result.peak], threshold, INCONCLUSIVE_BAND),
        scores: vec![s],
        threshold,
        band: INCONCLUSIVE_BAND,
        protocol: Protocol::Single,
    })
}

pub fn verify(
    store: &ReferenceStore,
    id: &str,
    test: &SpecklePattern,
    config: &OpticalConfig,
    threshold: f64,
    search: &RotationSearch,
) -> Result<AuthDecision> {
    verify_record(&store.load(id)?, test, config, threshold, search)
}

/// Multi-setup challenge: every probe must match the reference captured
/// under its setup.
pub fn challenge_record(
    record: &ReferenceRecord,
    probes: &[(SpecklePattern, OpticalConfig)],
    threshold: f64,
    search: &RotationSearch,
) -> Result<AuthDecision> {
    run_challenge(record, probes, threshold, search, 2)
}

pub fn challenge_verify(
    store: &ReferenceStore,
    id: &str,
    probes: &[(SpecklePattern, OpticalConfig)],
    threshold: f64,
    search: &RotationSearch,
) -> Result<AuthDecision> {
    challenge_record(&store.load(id)?, probes, threshold, search)
}

fn run_challenge(
    record: &ReferenceRecord,
    probes: &[(SpecklePattern, OpticalConfig)],
    threshold: f64,
    search: &RotationSearch,
    min_probes: usize,
) -> Result<AuthDecision> {
    if probes.len() < min_probes {
        return Err(OseError::invalid(format!(
            "challenge needs at least {min_probes} probes with distinct configs, got {}",
            probes.len()
        )));
    }
    let mut fps = Vec::with_capacity(probes.len());
    for (test, config) in probes {
        let fp = check_probe(test, config)?;
        if fps.contains(&fp) {
            return Err(OseError::invalid(format!("probe config {fp} appears more than once")));
        }
        if record.entry_for(&fp).is_none() {
            return Err(OseError::invalid(format!("probe config {fp} has no enrolled reference for id {:?}", record.id)));
        }
        fps.push(fp);
    }
    let mut scores = Vec::with_capacity(probes.len());
    for ((test, _), fp) in probes.iter().zip(&fps) {
        scores.push(score(record.entry_for(fp).expect("checked above"), test, search)?);
    }
    let peaks: Vec<f64> = scores.iter().map(|s| s.result.peak).collect();
    Ok(AuthDecision {
        verdict: decide(&peaks, threshold, INCONCLUSIVE_BAND),
        scores,
        threshold,
        band: INCONCLUSIVE_BAND,
        protocol: Protocol::Challenge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::ShiftRange;

    fn cfg(lambda_nm: f64) -> OpticalConfig {
        let mut c = OpticalConfig::default().with_lambda(lambda_nm * 1e-9);
        c.sensor.px_w = 32;
        c.sensor.px_h = 32;
        c
    }

    fn pattern(seed: u64, config: &OpticalConfig) -> SpecklePattern {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((32, 32), |_| rng.random_range(0..256u16));
        SpecklePattern::new(data, 8, config.fingerprint()).unwrap()
    }

    fn search() -> RotationSearch {
        RotationSearch::new(0.0, 0.01, ShiftRange::square(2))
    }

    fn t0() -> DateTime<Utc> {
        DateTime::parse_from_rfc3339("2024-05-01T12:00:00Z").unwrap().with_timezone(&Utc)
    }

    #[test]
    fn calibration_examples() {
        let c = calibrate_threshold(&[0.9, 0.85], &[0.06, 0.08]).unwrap();
        assert!((c.threshold - 0.465).abs() < 1e-12);
        assert!((c.margin - 0.385).abs() < 1e-12);
        let c = calibrate_threshold(&[1.0], &[0.0]).unwrap();
        assert_eq!((c.threshold, c.margin), (0.5, 0.5));
        match calibrate_threshold(&[0.5], &[0.6]) {
            Err(OseError::NonSeparable { min_genuine, max_impostor }) => {
                assert_eq!((min_genuine, max_impostor), (0.5, 0.6));
            }
            other => panic!("{other:?}"),
        }
        assert!(calibrate_threshold(&[], &[0.1]).is_err());
    }

    #[test]
    fn verdict_bands() {
        assert_eq!(decide(&[0.9, 0.5], 0.5, 0.05), Verdict::Genuine);
        assert_eq!(decide(&[0.9, 0.47], 0.5, 0.05), Verdict::Inconclusive);
        assert_eq!(decide(&[0.9, 0.44], 0.5, 0.05), Verdict::Counterfeit);
        assert_eq!(decide(&[0.1], 0.5, 0.05), Verdict::Counterfeit);
    }

    #[test]
    fn enroll_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let store = ReferenceStore::open(dir.path()).unwrap();
        let c = cfg(650.0);
        let rec = store.enroll_at("card-1", vec![(pattern(1, &c), c)], t0()).unwrap();
        assert_eq!(rec.entries.len(), 1);
        let back = store.load("card-1").unwrap();
        assert_eq!(back, rec);
        assert_eq!(store.ids().unwrap(), vec!["card-1".to_string()]);
        let m: serde_json::Value = read_json(&dir.path().join("card-1/manifest.json")).unwrap();
        for key in ["id", "created_at", "entries", "content_hash"] {
            assert!(m.get(key).is_some(), "{key}");
        }
        let e = &m["entries"][0];
        assert_eq!(e["pattern_file"], "entry-000.png");
        assert_eq!(e["config_file"], "entry-000.json");
        assert_eq!(e["fingerprint"], c.fingerprint());
    }

    #[test]
    fn re_enroll_is_idempotent_and_conflicts_detected() {
        let dir = tempfile::tempdir().unwrap();
        let store = ReferenceStore::open(dir.path()).unwrap();
        let c = cfg(650.0);
        let a = store.enroll_at("x", vec![(pattern(1, &c), c)], t0()).unwrap();
        let later = t0() + chrono::Duration::hours(1);
        let b = store.enroll_at("x", vec![(pattern(1, &c), c)], later).unwrap();
        assert_eq!(a, b);
        assert_eq!(store.ids().unwrap().len(), 1);
        let err = store.enroll_at("x", vec![(pattern(2, &c), c)], t0()).unwrap_err();
        assert!(matches!(err, OseError::Conflict(_)));
        // No stray temporaries are left behind.
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn enroll_rejects_bad_input() {
        let dir = tempfile::tempdir().unwrap();
        let store = ReferenceStore::open(dir.path()).unwrap();
        let c = cfg(650.0);
        assert!(matches!(store.enroll("x", vec![]), Err(OseError::InvalidArgument(_))));
        assert!(matches!(store.enroll("", vec![(pattern(1, &c), c)]), Err(OseError::InvalidArgument(_))));
        assert!(store.enroll("../evil", vec![(pattern(1, &c), c)]).is_err());
        let dup = vec![(pattern(1, &c), c), (pattern(2, &c), c)];
        assert!(matches!(store.enroll("x", dup), Err(OseError::InvalidArgument(_))));
        let other = cfg(635.0);
        assert!(store.enroll("x", vec![(pattern(1, &c), other)]).is_err());
    }

    #[test]
    fn verify_lookups() {
        let dir = tempfile::tempdir().unwrap();
        let store = ReferenceStore::open(dir.path()).unwrap();
        let c = cfg(650.0);
        store.enroll_at("x", vec![(pattern(1, &c), c)], t0()).unwrap();
        let d = verify(&store, "x", &pattern(1, &c), &c, DEFAULT_THRESHOLD, &search()).unwrap();
        assert_eq!(d.verdict, Verdict::Genuine);
        assert_eq!(d.protocol, Protocol::Single);
        assert!((d.scores[0].result.peak - 1.0).abs() < 1e-9);
        let d = verify(&store, "x", &pattern(9, &c), &c, DEFAULT_THRESHOLD, &search()).unwrap();
        assert_eq!(d.verdict, Verdict::Counterfeit);
        assert!(matches!(
            verify(&store, "nope", &pattern(1, &c), &c, 0.5, &search()),
            Err(OseError::NotFound(_))
        ));
        let other = cfg(670.0);
        assert!(matches!(
            verify(&store, "x", &pattern(1, &other), &other, 0.5, &search()),
            Err(OseError::NotFound(_))
        ));
    }

    #[test]
    fn decision_json_fields() {
        let c = cfg(650.0);
        let rec = ReferenceRecord {
            id: "x".into(),
            entries: vec![ReferenceEntry { pattern: pattern(1, &c), config: c }],
            created_at: t0(),
            content_hash: String::new(),
        };
        let d = verify_record(&rec, &pattern(1, &c), &c, 0.5, &search()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&d.to_json()).unwrap();
        assert_eq!(v["verdict"], "genuine");
        assert_eq!(v["protocol"], "single");
        assert_eq!(v["threshold"], 0.5);
        let s = &v["scores"][0];
        for key in ["fingerprint", "peak", "dx", "dy", "rotation"] {
            assert!(s.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn challenge_preconditions() {
        let cs = [cfg(635.0), cfg(650.0), cfg(670.0)];
        let rec = ReferenceRecord {
            id: "x".into(),
            entries: cs
                .iter()
                .enumerate()
                .map(|(i, c)| ReferenceEntry { pattern: pattern(i as u64, c), config: *c })
                .collect(),
            created_at: t0(),
            content_hash: String::new(),
        };
        let probes: Vec<_> = cs.iter().enumerate().map(|(i, c)| (pattern(i as u64, c), *c)).collect();
        let d = challenge_record(&rec, &probes, 0.5, &search()).unwrap();
        assert_eq!(d.verdict, Verdict::Genuine);
        assert_eq!(d.scores.len(), 3);

        assert!(matches!(challenge_record(&rec, &probes[..1], 0.5, &search()), Err(OseError::InvalidArgument(_))));
        let unknown = cfg(700.0);
        let mut bad = probes.clone();
        bad.push((pattern(5, &unknown), unknown));
        let err = challenge_record(&rec, &bad, 0.5, &search()).unwrap_err();
        assert!(err.to_string().contains(&unknown.fingerprint()));

        // One failing probe sinks the whole challenge.
        let mut one_bad = probes.clone();
        one_bad[2].0 = pattern(42, &cs[2]);
        assert_eq!(challenge_record(&rec, &one_bad, 0.5, &search()).unwrap().verdict, Verdict::Counterfeit);
    }

    #[test]
    fn single_probe_challenge_matches_verify() {
        let c = cfg(650.0);
        let rec = ReferenceRecord {
            id: "x".into(),
            entries: vec![ReferenceEntry { pattern: pattern(1, &c), config: c }],
            created_at: t0(),
            content_hash: String::new(),
        };
        for seed in [1, 2, 3] {
            let probe = pattern(seed, &c);
            let single = verify_record(&rec, &probe, &c, 0.5, &search()).unwrap();
            let chal = run_challenge(&rec, &[(probe, c)], 0.5, &search(), 1).unwrap();
            assert_eq!(chal.verdict, single.verdict);
            assert_eq!(chal.scores, single.scores);
        }
    }
}
