//! Wire format for command output: a versioned envelope around a
//! command-specific payload, with floats printed to full precision and a
//! content hash tying every report back to its model file.

use std::io;
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex;
use serde_json::{json, Value};

use crate::kernels::{AldousReport, GammaReport};
use crate::model::ModelSpec;
use crate::montecarlo::DecayEstimate;
use crate::spectral::{SpectrumSuite, StructuralReport, VerifyReport};

pub const SCHEMA: &str = "exgap/1";

/// FNV-1a over the canonical JSON encoding of the model, so the same model
/// hashes identically regardless of input formatting.
pub fn model_hash(spec: &ModelSpec) -> String {
    let canonical =
        serde_json::to_string(&spec.to_json_value()).expect("model serialization is total");
    format!("{:016x}", fnv1a64(canonical.as_bytes()))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Wraps a payload in the versioned envelope.
pub fn envelope(command: &str, spec: &ModelSpec, payload: Value) -> Value {
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({
        "schema": SCHEMA,
        "command": command,
        "model_hash": model_hash(spec),
        "timestamp": timestamp,
        "payload": payload,
    })
}

struct PreciseFormatter;

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes with every float at seventeen significant digits, enough to
/// reconstruct the exact binary value.
pub fn to_json_string(value: &Value) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PreciseFormatter);
    serde::Serialize::serialize(value, &mut ser).expect("in-memory serialization");
    String::from_utf8(out).expect("serializer emits utf-8")
}

/// Complex numbers on the wire are `[re, im]` pairs.
pub fn complex_pairs(eigs: &[Complex<f64>]) -> Value {
    Value::Array(eigs.iter().map(|e| json!([e.re, e.im])).collect())
}

pub fn gamma_payload(report: &GammaReport) -> Value {
    serde_json::to_value(report).expect("report serialization is total")
}

pub fn spectrum_payload(suite: &SpectrumSuite) -> Value {
    json!({
        "kmax": suite.kmax,
        "gap_rw": suite.gap_rw,
        "gamma": suite.gamma,
        "gap_upto": suite.gap_upto(),
        "levels": suite
            .levels
            .iter()
            .map(|l| {
                json!({
                    "k": l.k,
                    "dim": l.dim,
                    "reversible": l.reversible,
                    "zero_multiplicity": l.zero_multiplicity,
                    "gap": l.gap,
                    "eigs": complex_pairs(&l.eigs),
                    "new_eigs": complex_pairs(&l.new_eigs),
                })
            })
            .collect::<Vec<_>>(),
    })
}

pub fn verify_payload(
    verdict: &VerifyReport,
    aldous: &AldousReport,
    structural: &StructuralReport,
) -> Value {
    json!({
        "kmax": verdict.kmax,
        "gap_rw": verdict.gap_rw,
        "gamma": verdict.gamma,
        "kinetic_product": verdict.kinetic_product,
        "gap_upto": verdict.gap_upto,
        "lower_ok": verdict.lower_ok,
        "sandwich_ok": verdict.sandwich_ok,
        "aldous": {
            "holds": verdict.aldous_holds,
            "gap_ok": verdict.aldous_gap_ok,
            "margins": serde_json::to_value(&aldous.margins).expect("margins serialize"),
        },
        "levels": verdict
            .levels
            .iter()
            .map(|l| {
                json!({
                    "k": l.k,
                    "dim": l.dim,
                    "gap": l.gap,
                    "min_new_re": l.min_new_re,
                    "lower_ok": l.lower_ok,
                    "zero_simple": l.zero_simple,
                })
            })
            .collect::<Vec<_>>(),
        "structural": {
            "pass": structural.pass(),
            "levels": structural
                .levels
                .iter()
                .map(|l| {
                    json!({
                        "k": l.k,
                        "intertwining": l.intertwining,
                        "mu_residual": l.mu_residual,
                        "backward": l.backward,
                        "reversibility": l.reversibility,
                    })
                })
                .collect::<Vec<_>>(),
        },
        "pass": verdict.pass,
    })
}

pub fn decay_payload(estimate: &DecayEstimate) -> Value {
    json!({
        "rate": estimate.rate,
        "stderr": estimate.stderr,
        "window_end": estimate.window_end,
        "points": estimate.points,
    })
}
