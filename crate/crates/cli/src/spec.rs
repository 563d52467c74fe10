//! JSON specs for payment streams and accumulation functions.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use trm_core::{
    AccumulationError, AccumulationFunction, CashFlow, DensitySegment, PaymentStream,
    RegulatedStream, Segment, StepStream, StreamError,
};

/// Parse failure with the JSON path of the offending field (`.` for the root).
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path}: {message}")]
pub struct ParseError {
    pub path: String,
    pub message: String,
}

impl ParseError {
    fn at(path: impl Into<String>, message: impl ToString) -> Self {
        let path = path.into();
        ParseError {
            path: if path.is_empty() { ".".into() } else { path },
            message: message.to_string(),
        }
    }
}

/// Stream spec as written by `approximate`; parsing goes through
/// [`parse_stream`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StreamSpec {
    Step { flows: Vec<FlowSpec> },
    Piecewise { segments: Vec<SegmentSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub t: f64,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub from: f64,
    pub to: f64,
    pub poly: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceSegmentSpec {
    pub from: f64,
    pub to: f64,
    pub delta_poly: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StepBody {
    flows: Vec<FlowSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PiecewiseBody {
    segments: Vec<SegmentSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantRateBody {
    i: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerBody {
    x: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ForceBody {
    segments: Vec<ForceSegmentSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProductBody {
    of: Vec<Value>,
}

/// Either kind of parsed spec.
#[derive(Debug, Clone, PartialEq)]
pub enum Spec {
    Stream(PaymentStream),
    Accumulation(AccumulationFunction),
}

const STREAM_KINDS: &[&str] = &["step", "piecewise"];
const ACCUMULATION_KINDS: &[&str] = &["constant_rate", "power", "force", "product"];

fn join(prefix: &str, path: &str) -> String {
    match (prefix.is_empty(), path) {
        (true, p) => p.to_string(),
        (false, "." | "") => prefix.to_string(),
        (false, p) => format!("{prefix}.{p}"),
    }
}

fn decode<T: serde::de::DeserializeOwned>(value: Value, prefix: &str) -> Result<T, ParseError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = join(prefix, &e.path().to_string());
        ParseError::at(path, e.into_inner())
    })
}

fn to_value(text: &[u8]) -> Result<Value, ParseError> {
    serde_json::from_slice(text).map_err(|e| ParseError::at(".", e))
}

/// Removes and returns the `kind` tag, checking it against `allowed`.
fn split_kind(
    mut value: Value,
    prefix: &str,
    allowed: &[&str],
) -> Result<(String, Value), ParseError> {
    let Some(obj) = value.as_object_mut() else {
        return Err(ParseError::at(join(prefix, "."), "expected a JSON object"));
    };
    let kind = match obj.remove("kind") {
        Some(Value::String(k)) => k,
        Some(_) => {
            return Err(ParseError::at(
                join(prefix, "kind"),
                "`kind` must be a string",
            ))
        }
        None => return Err(ParseError::at(join(prefix, "kind"), "missing field `kind`")),
    };
    if !allowed.contains(&kind.as_str()) {
        return Err(ParseError::at(
            join(prefix, "kind"),
            format!(
                "unknown kind `{kind}`, expected one of {}",
                allowed.join(", ")
            ),
        ));
    }
    Ok((kind, value))
}

/// Parses a stream or accumulation spec, dispatching on `kind`.
pub fn parse_spec(text: &[u8]) -> Result<Spec, ParseError> {
    let value = to_value(text)?;
    match value.get("kind").and_then(Value::as_str) {
        Some(k) if STREAM_KINDS.contains(&k) => stream_from_value(value).map(Spec::Stream),
        Some(k) if ACCUMULATION_KINDS.contains(&k) => {
            accumulation_from_value(value, "").map(Spec::Accumulation)
        }
        _ => {
            let all: Vec<&str> = STREAM_KINDS
                .iter()
                .chain(ACCUMULATION_KINDS)
                .copied()
                .collect();
            split_kind(value, "", &all).map(|_| unreachable!("kind already rejected"))
        }
    }
}

pub fn parse_stream(text: &[u8]) -> Result<PaymentStream, ParseError> {
    stream_from_value(to_value(text)?)
}

pub fn parse_accumulation(text: &[u8]) -> Result<AccumulationFunction, ParseError> {
    accumulation_from_value(to_value(text)?, "")
}

fn stream_from_value(value: Value) -> Result<PaymentStream, ParseError> {
    let (kind, body) = split_kind(value, "", STREAM_KINDS)?;
    if kind == "step" {
        let body: StepBody = decode(body, "")?;
        let flows: Vec<CashFlow> = body
            .flows
            .iter()
            .map(|f| CashFlow::new(f.t, f.amount))
            .collect();
        StepStream::from_cashflows(flows)
            .map(PaymentStream::Step)
            .map_err(|e| stream_error("flows", e))
    } else {
        let body: PiecewiseBody = decode(body, "")?;
        let segments: Vec<Segment> = body
            .segments
            .into_iter()
            .map(|s| Segment::new(s.from, s.to, s.poly))
            .collect();
        RegulatedStream::new(segments)
            .map(PaymentStream::Regulated)
            .map_err(|e| stream_error("segments", e))
    }
}

fn stream_error(field: &str, e: StreamError) -> ParseError {
    match e {
        StreamError::NonFiniteFlow { index } => ParseError::at(format!("{field}[{index}]"), e),
        StreamError::InvalidSegment { index, .. } => ParseError::at(format!("{field}[{index}]"), e),
        other => ParseError::at(field, other),
    }
}

fn accumulation_from_value(value: Value, prefix: &str) -> Result<AccumulationFunction, ParseError> {
    let (kind, body) = split_kind(value, prefix, ACCUMULATION_KINDS)?;
    let err = |field: &str, e: AccumulationError| ParseError::at(join(prefix, field), e);
    match kind.as_str() {
        "constant_rate" => {
            let ConstantRateBody { i } = decode(body, prefix)?;
            AccumulationFunction::constant_rate(i).map_err(|e| err("i", e))
        }
        "power" => {
            let PowerBody { x } = decode(body, prefix)?;
            AccumulationFunction::power(x).map_err(|e| err("x", e))
        }
        "force" => {
            let ForceBody { segments } = decode(body, prefix)?;
            let segments = segments
                .into_iter()
                .map(|s| DensitySegment::new(s.from, s.to, s.delta_poly))
                .collect();
            AccumulationFunction::force(segments).map_err(|e| match e {
                AccumulationError::InvalidSegment { index, .. } => {
                    err(&format!("segments[{index}]"), e)
                }
                other => err("segments", other),
            })
        }
        _ => {
            let ProductBody { of } = decode(body, prefix)?;
            let factors = of
                .into_iter()
                .enumerate()
                .map(|(k, v)| accumulation_from_value(v, &join(prefix, &format!("of[{k}]"))))
                .collect::<Result<Vec<_>, _>>()?;
            AccumulationFunction::product(factors).map_err(|e| err("of", e))
        }
    }
}

impl StreamSpec {
    /// Spec of a step stream, one entry per flow.
    pub fn from_step(f: &StepStream) -> StreamSpec {
        StreamSpec::Step {
            flows: f
                .flows()
                .iter()
                .map(|c| FlowSpec {
                    t: c.t,
                    amount: c.amount,
                })
                .collect(),
        }
    }
}
