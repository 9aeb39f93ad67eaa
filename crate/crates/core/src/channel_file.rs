//! Channel description files.
//!
//! A file holds one JSON object or an array of them. Every object carries a
//! `kind` tag: `bcc`, `imperfection`, `mac`, `gaussian` or `witness`. Discrete
//! kinds name their alphabets and give dense tables in row-major order,
//! either flat or as nested arrays. Validation errors report the line of the
//! offending value.
//!
//! ```json
//! {
//!   "kind": "imperfection",
//!   "unit": 1,
//!   "alphabets": { "q": ["off", "on"], "qhat": 2 },
//!   "cond": [[0.9, 0.1], [0.1, 0.9]]
//! }
//! ```

use std::path::Path;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::channel::{
    BccChannel, ChannelError, DiscreteSystem, GaussianParams, ImperfectionChannel, MacChannel,
};
use crate::prob::{JointPmf, Pmf, ProbError};
use crate::region::DiscreteWitness;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelFileError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

impl ChannelFileError {
    /// Line of the error, when known.
    pub fn line(&self) -> Option<usize> {
        match self {
            ChannelFileError::Io { .. } => None,
            ChannelFileError::Syntax { line, .. } | ChannelFileError::Invalid { line, .. } => {
                Some(*line)
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, ChannelFileError>;

/// One alphabet of a discrete object.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    pub axis: String,
    pub labels: Vec<String>,
}

impl Alphabet {
    /// Alphabet of `size` letters labelled `0..size`.
    pub fn numbered(axis: &str, size: usize) -> Self {
        Alphabet {
            axis: axis.to_string(),
            labels: (0..size).map(|i| i.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone)]
pub enum ChannelItem {
    Bcc(BccChannel),
    /// `unit` is 1 or 2 when given.
    Imperfection {
        unit: Option<u8>,
        channel: ImperfectionChannel,
    },
    Mac(MacChannel),
    Gaussian(GaussianParams),
    Witness(DiscreteWitness),
}

impl ChannelItem {
    pub fn kind(&self) -> &'static str {
        match self {
            ChannelItem::Bcc(_) => "bcc",
            ChannelItem::Imperfection { .. } => "imperfection",
            ChannelItem::Mac(_) => "mac",
            ChannelItem::Gaussian(_) => "gaussian",
            ChannelItem::Witness(_) => "witness",
        }
    }
}

/// A parsed object with its alphabets and source line.
#[derive(Debug, Clone)]
pub struct ChannelDocument {
    pub name: Option<String>,
    /// Empty for Gaussian objects.
    pub alphabets: Vec<Alphabet>,
    pub item: ChannelItem,
    /// Line where the object starts; 0 for documents built in code.
    pub line: usize,
}

impl ChannelDocument {
    /// Wraps `item` with numbered alphabets.
    pub fn new(item: ChannelItem) -> Self {
        let alphabets = axes_of(&item)
            .iter()
            .zip(sizes_of(&item))
            .map(|(a, s)| Alphabet::numbered(a, s))
            .collect();
        ChannelDocument {
            name: None,
            alphabets,
            item,
            line: 0,
        }
    }
}

fn axes_of(item: &ChannelItem) -> &'static [&'static str] {
    match item {
        ChannelItem::Bcc(_) => &["x", "y1", "y2"],
        ChannelItem::Imperfection { .. } => &["q", "qhat"],
        ChannelItem::Mac(_) => &["qhat1", "qhat2", "s"],
        ChannelItem::Gaussian(_) => &[],
        ChannelItem::Witness(_) => &["u", "v", "x", "q1", "q2"],
    }
}

fn sizes_of(item: &ChannelItem) -> Vec<usize> {
    match item {
        ChannelItem::Bcc(c) => vec![c.x_size(), c.y1_size(), c.y2_size()],
        ChannelItem::Imperfection { channel, .. } => vec![channel.q_size(), channel.qhat_size()],
        ChannelItem::Mac(c) => vec![c.qhat1_size(), c.qhat2_size(), c.s_size()],
        ChannelItem::Gaussian(_) => vec![],
        ChannelItem::Witness(w) => {
            let d = w.p_uvx.dims();
            vec![d[0], d[1], d[2], w.p_q1.len(), w.p_q2.len()]
        }
    }
}

pub fn load_channel_file(path: &Path) -> Result<Vec<ChannelDocument>> {
    let text = std::fs::read_to_string(path).map_err(|e| ChannelFileError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_channel_file(&text)
}

pub fn parse_channel_file(text: &str) -> Result<Vec<ChannelDocument>> {
    let value: Value = serde_json::from_str(text).map_err(|e| ChannelFileError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let locator = Locator::new(text);
    let objects: Vec<&Value> = match &value {
        Value::Array(items) => items.iter().collect(),
        other => vec![other],
    };
    if objects.is_empty() {
        return Err(ChannelFileError::Invalid {
            line: 1,
            message: "file contains no channel objects".into(),
        });
    }
    objects
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let spans = locator.docs.get(i).cloned().unwrap_or_default();
            parse_document(v, &DocContext { locator: &locator, spans })
        })
        .collect()
}

struct DocContext<'a> {
    locator: &'a Locator<'a>,
    spans: DocSpans,
}

impl DocContext<'_> {
    fn doc_line(&self) -> usize {
        self.locator.line_of(self.spans.start)
    }

    fn key_line(&self, key: &str) -> usize {
        self.spans
            .keys
            .iter()
            .find(|k| k.name == key)
            .map(|k| self.locator.line_of(k.offset))
            .unwrap_or_else(|| self.doc_line())
    }

    fn leaf_line(&self, key: &str, index: usize) -> usize {
        self.spans
            .keys
            .iter()
            .find(|k| k.name == key)
            .and_then(|k| k.leaves.get(index))
            .map(|&o| self.locator.line_of(o))
            .unwrap_or_else(|| self.key_line(key))
    }

    fn invalid(&self, line: usize, message: impl Into<String>) -> ChannelFileError {
        ChannelFileError::Invalid {
            line,
            message: message.into(),
        }
    }
}

fn parse_document(value: &Value, ctx: &DocContext) -> Result<ChannelDocument> {
    let obj = value
        .as_object()
        .ok_or_else(|| ctx.invalid(ctx.doc_line(), "expected a JSON object"))?;
    let kind = obj
        .get("kind")
        .ok_or_else(|| ctx.invalid(ctx.doc_line(), "missing field `kind`"))?
        .as_str()
        .ok_or_else(|| ctx.invalid(ctx.key_line("kind"), "`kind` must be a string"))?;
    let name = match obj.get("name") {
        None => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(ctx.invalid(ctx.key_line("name"), "`name` must be a string")),
    };
    let (allowed, axes): (&[&str], &[&str]) = match kind {
        "bcc" => (&["cond"], &["x", "y1", "y2"]),
        "imperfection" => (&["cond", "unit"], &["q", "qhat"]),
        "mac" => (&["cond"], &["qhat1", "qhat2", "s"]),
        "witness" => (&["p_uvx", "p_q1", "p_q2"], &["u", "v", "x", "q1", "q2"]),
        "gaussian" => (&["P", "N1", "N2", "N3", "alpha1", "alpha2"], &[]),
        other => {
            return Err(ctx.invalid(
                ctx.key_line("kind"),
                format!("unknown kind `{other}`; expected bcc, imperfection, mac, gaussian or witness"),
            ))
        }
    };
    for key in obj.keys() {
        let known = key == "kind"
            || key == "name"
            || (key == "alphabets" && !axes.is_empty())
            || allowed.contains(&key.as_str());
        if !known {
            return Err(ctx.invalid(ctx.key_line(key), format!("unknown field `{key}` for kind `{kind}`")));
        }
    }
    if kind == "gaussian" {
        let mut p = [0.0; 6];
        for (slot, key) in p.iter_mut().zip(allowed) {
            *slot = number(obj, key, ctx)?;
        }
        let params = GaussianParams {
            p: p[0],
            n1: p[1],
            n2: p[2],
            n3: p[3],
            alpha1: p[4],
            alpha2: p[5],
        };
        // Validation of alpha_i = 1 is left to the caller, which knows
        // whether the override is active.
        params
            .build(true)
            .map_err(|e| ctx.invalid(ctx.doc_line(), e.to_string()))?;
        return Ok(ChannelDocument {
            name,
            alphabets: Vec::new(),
            item: ChannelItem::Gaussian(params),
            line: ctx.doc_line(),
        });
    }
    let alphabets = parse_alphabets(obj, axes, ctx)?;
    let size = |axis: &str| alphabets.iter().find(|a| a.axis == axis).map_or(0, Alphabet::len);
    let item = match kind {
        "bcc" => {
            let cond = table(obj, "cond", ctx)?;
            let ch = BccChannel::new(size("x"), size("y1"), size("y2"), cond)
                .map_err(|e| channel_error(e, "cond", size("y1") * size("y2"), ctx))?;
            ChannelItem::Bcc(ch)
        }
        "imperfection" => {
            let unit = match obj.get("unit") {
                None => None,
                Some(v) => match v.as_u64() {
                    Some(u @ (1 | 2)) => Some(u as u8),
                    _ => return Err(ctx.invalid(ctx.key_line("unit"), "`unit` must be 1 or 2")),
                },
            };
            let cond = table(obj, "cond", ctx)?;
            let channel = ImperfectionChannel::new(size("q"), size("qhat"), cond)
                .map_err(|e| channel_error(e, "cond", size("qhat"), ctx))?;
            ChannelItem::Imperfection { unit, channel }
        }
        "mac" => {
            let cond = table(obj, "cond", ctx)?;
            let ch = MacChannel::new(size("qhat1"), size("qhat2"), size("s"), cond)
                .map_err(|e| channel_error(e, "cond", size("s"), ctx))?;
            ChannelItem::Mac(ch)
        }
        _ => {
            let dims = vec![size("u"), size("v"), size("x")];
            let uvx = table(obj, "p_uvx", ctx)?;
            let p_uvx = JointPmf::new(dims, uvx).map_err(|e| prob_error(e, "p_uvx", ctx))?;
            let pmf = |key: &str, axis: &str| -> Result<Pmf> {
                let t = table(obj, key, ctx)?;
                if t.len() != size(axis) {
                    return Err(ctx.invalid(
                        ctx.key_line(key),
                        format!("`{key}` has {} entries, alphabet `{axis}` has {}", t.len(), size(axis)),
                    ));
                }
                Pmf::new(t).map_err(|e| prob_error(e, key, ctx))
            };
            ChannelItem::Witness(DiscreteWitness {
                p_uvx,
                p_q1: pmf("p_q1", "q1")?,
                p_q2: pmf("p_q2", "q2")?,
            })
        }
    };
    Ok(ChannelDocument {
        name,
        alphabets,
        item,
        line: ctx.doc_line(),
    })
}

fn number(obj: &Map<String, Value>, key: &str, ctx: &DocContext) -> Result<f64> {
    obj.get(key)
        .ok_or_else(|| ctx.invalid(ctx.doc_line(), format!("missing field `{key}`")))?
        .as_f64()
        .ok_or_else(|| ctx.invalid(ctx.key_line(key), format!("`{key}` must be a number")))
}

fn parse_alphabets(obj: &Map<String, Value>, axes: &[&str], ctx: &DocContext) -> Result<Vec<Alphabet>> {
    let map = obj
        .get("alphabets")
        .ok_or_else(|| ctx.invalid(ctx.doc_line(), "missing field `alphabets`"))?
        .as_object()
        .ok_or_else(|| ctx.invalid(ctx.key_line("alphabets"), "`alphabets` must be an object"))?;
    let line = ctx.key_line("alphabets");
    if let Some(extra) = map.keys().find(|k| !axes.contains(&k.as_str())) {
        return Err(ctx.invalid(
            line,
            format!("unknown alphabet `{extra}`; expected {}", axes.join(", ")),
        ));
    }
    axes.iter()
        .map(|&axis| {
            let v = map
                .get(axis)
                .ok_or_else(|| ctx.invalid(line, format!("missing alphabet `{axis}`")))?;
            let labels = match v {
                Value::Array(items) => items
                    .iter()
                    .map(|l| match l {
                        Value::String(s) => Ok(s.clone()),
                        _ => Err(ctx.invalid(line, format!("labels of alphabet `{axis}` must be strings"))),
                    })
                    .collect::<Result<Vec<_>>>()?,
                Value::Number(_) => match v.as_u64() {
                    Some(s) => (0..s).map(|i| i.to_string()).collect(),
                    None => return Err(ctx.invalid(line, format!("size of alphabet `{axis}` must be a positive integer"))),
                },
                _ => {
                    return Err(ctx.invalid(
                        line,
                        format!("alphabet `{axis}` must be a list of labels or a size"),
                    ))
                }
            };
            if labels.is_empty() {
                return Err(ctx.invalid(line, format!("alphabet `{axis}` is empty")));
            }
            let mut sorted = labels.clone();
            sorted.sort();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(ctx.invalid(line, format!("alphabet `{axis}` repeats a label")));
            }
            Ok(Alphabet {
                axis: axis.to_string(),
                labels,
            })
        })
        .collect()
}

/// Flattens a number or nested array of numbers in row-major order.
fn table(obj: &Map<String, Value>, key: &str, ctx: &DocContext) -> Result<Vec<f64>> {
    fn walk(v: &Value, out: &mut Vec<f64>) -> std::result::Result<(), usize> {
        match v {
            Value::Array(items) => items.iter().try_for_each(|i| walk(i, out)),
            Value::Number(n) => {
                out.push(n.as_f64().unwrap_or(f64::NAN));
                Ok(())
            }
            _ => Err(out.len()),
        }
    }
    let v = obj
        .get(key)
        .ok_or_else(|| ctx.invalid(ctx.doc_line(), format!("missing field `{key}`")))?;
    let mut out = Vec::new();
    walk(v, &mut out).map_err(|at| {
        ctx.invalid(ctx.leaf_line(key, at), format!("`{key}` entry {at} is not a number"))
    })?;
    Ok(out)
}

fn channel_error(e: ChannelError, key: &str, row_len: usize, ctx: &DocContext) -> ChannelFileError {
    let line = match &e {
        ChannelError::RowNotNormalized { row, .. } => ctx.leaf_line(key, row * row_len),
        ChannelError::InvalidEntry { index, .. } => ctx.leaf_line(key, *index),
        ChannelError::Prob(p) => return prob_error(p.clone(), key, ctx),
        ChannelError::ShapeMismatch { .. } => ctx.key_line(key),
        _ => ctx.doc_line(),
    };
    ctx.invalid(line, format!("`{key}`: {e}"))
}

fn prob_error(e: ProbError, key: &str, ctx: &DocContext) -> ChannelFileError {
    let line = match &e {
        ProbError::InvalidProbability { index, .. } => ctx.leaf_line(key, *index),
        _ => ctx.key_line(key),
    };
    ctx.invalid(line, format!("`{key}`: {e}"))
}

/// Source positions of one object: its start and, per top-level key, the
/// key offset and the offsets of every scalar inside its value.
#[derive(Debug, Clone, Default)]
struct DocSpans {
    start: usize,
    keys: Vec<KeySpan>,
}

#[derive(Debug, Clone)]
struct KeySpan {
    name: String,
    offset: usize,
    leaves: Vec<usize>,
}

/// Position scanner over text that already parsed as valid JSON.
struct Locator<'a> {
    text: &'a [u8],
    docs: Vec<DocSpans>,
}

impl<'a> Locator<'a> {
    fn new(text: &'a str) -> Self {
        let mut loc = Locator {
            text: text.as_bytes(),
            docs: Vec::new(),
        };
        let mut pos = loc.skip_ws(0);
        match loc.text.get(pos) {
            Some(b'[') => {
                pos = loc.skip_ws(pos + 1);
                while loc.text.get(pos).is_some_and(|&b| b != b']') {
                    pos = if loc.text[pos] == b'{' {
                        let (spans, end) = loc.object(pos);
                        loc.docs.push(spans);
                        end
                    } else {
                        loc.docs.push(DocSpans {
                            start: pos,
                            keys: Vec::new(),
                        });
                        loc.value(pos, &mut Vec::new())
                    };
                    pos = loc.skip_ws(pos);
                    if loc.text.get(pos) == Some(&b',') {
                        pos = loc.skip_ws(pos + 1);
                    }
                }
            }
            Some(b'{') => {
                let (spans, _) = loc.object(pos);
                loc.docs.push(spans);
            }
            _ => {}
        }
        loc
    }

    fn line_of(&self, offset: usize) -> usize {
        1 + self.text[..offset.min(self.text.len())]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
    }

    fn skip_ws(&self, mut pos: usize) -> usize {
        while self.text.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
            pos += 1;
        }
        pos
    }

    /// Returns the string contents and the offset just past the closing quote.
    fn string(&self, pos: usize) -> (String, usize) {
        let mut end = pos + 1;
        while end < self.text.len() && self.text[end] != b'"' {
            end += if self.text[end] == b'\\' { 2 } else { 1 };
        }
        let raw = &self.text[pos..=end.min(self.text.len() - 1)];
        let s = serde_json::from_slice::<String>(raw).unwrap_or_default();
        (s, end + 1)
    }

    /// Skips one value, recording scalar offsets; returns the end offset.
    fn value(&self, pos: usize, leaves: &mut Vec<usize>) -> usize {
        match self.text[pos] {
            b'{' | b'[' => {
                let close = if self.text[pos] == b'{' { b'}' } else { b']' };
                let is_object = close == b'}';
                let mut p = self.skip_ws(pos + 1);
                while self.text.get(p).is_some_and(|&b| b != close) {
                    if is_object {
                        p = self.string(p).1;
                        p = self.skip_ws(p) + 1;
                        p = self.skip_ws(p);
                    }
                    p = self.value(p, leaves);
                    p = self.skip_ws(p);
                    if self.text.get(p) == Some(&b',') {
                        p = self.skip_ws(p + 1);
                    }
                }
                p + 1
            }
            b'"' => {
                leaves.push(pos);
                self.string(pos).1
            }
            _ => {
                leaves.push(pos);
                let mut p = pos;
                while self
                    .text
                    .get(p)
                    .is_some_and(|b| !matches!(b, b',' | b']' | b'}') && !b.is_ascii_whitespace())
                {
                    p += 1;
                }
                p
            }
        }
    }

    fn object(&self, pos: usize) -> (DocSpans, usize) {
        let mut spans = DocSpans {
            start: pos,
            keys: Vec::new(),
        };
        let mut p = self.skip_ws(pos + 1);
        while self.text.get(p).is_some_and(|&b| b != b'}') {
            let (name, after) = self.string(p);
            let offset = p;
            p = self.skip_ws(self.skip_ws(after) + 1);
            let mut leaves = Vec::new();
            p = self.value(p, &mut leaves);
            spans.keys.push(KeySpan {
                name,
                offset,
                leaves,
            });
            p = self.skip_ws(p);
            if self.text.get(p) == Some(&b',') {
                p = self.skip_ws(p + 1);
            }
        }
        (spans, p + 1)
    }
}

/// Serialises documents as a pretty-printed JSON array with flat tables.
pub fn write_channel_file(docs: &[ChannelDocument]) -> String {
    let values: Vec<Value> = docs.iter().map(document_value).collect();
    let mut s = serde_json::to_string_pretty(&Value::Array(values)).expect("JSON values serialise");
    s.push('\n');
    s
}

fn document_value(doc: &ChannelDocument) -> Value {
    let mut obj = Map::new();
    obj.insert("kind".into(), doc.item.kind().into());
    if let Some(name) = &doc.name {
        obj.insert("name".into(), name.clone().into());
    }
    if let ChannelItem::Gaussian(p) = &doc.item {
        for (k, v) in [
            ("P", p.p),
            ("N1", p.n1),
            ("N2", p.n2),
            ("N3", p.n3),
            ("alpha1", p.alpha1),
            ("alpha2", p.alpha2),
        ] {
            obj.insert(k.into(), v.into());
        }
        return Value::Object(obj);
    }
    let alphabets: Map<String, Value> = doc
        .alphabets
        .iter()
        .map(|a| (a.axis.clone(), a.labels.clone().into()))
        .collect();
    obj.insert("alphabets".into(), Value::Object(alphabets));
    let flat = |t: &[f64]| Value::from(t.to_vec());
    match &doc.item {
        ChannelItem::Bcc(c) => {
            obj.insert("cond".into(), flat(c.table()));
        }
        ChannelItem::Imperfection { unit, channel } => {
            if let Some(u) = unit {
                obj.insert("unit".into(), (*u).into());
            }
            obj.insert("cond".into(), flat(channel.table()));
        }
        ChannelItem::Mac(c) => {
            obj.insert("cond".into(), flat(c.table()));
        }
        ChannelItem::Witness(w) => {
            obj.insert("p_uvx".into(), flat(w.p_uvx.probs()));
            obj.insert("p_q1".into(), flat(w.p_q1.probs()));
            obj.insert("p_q2".into(), flat(w.p_q2.probs()));
        }
        ChannelItem::Gaussian(_) => unreachable!("handled above"),
    }
    Value::Object(obj)
}

/// A discrete cascade assembled from channel documents.
#[derive(Debug, Clone)]
pub struct DiscreteSetup {
    pub system: DiscreteSystem,
    pub witness: Option<DiscreteWitness>,
}

/// Assembles a discrete system from one `bcc`, one `mac`, up to two
/// `imperfection` objects and at most one `witness`.
///
/// Imperfection objects without a `unit` field are assigned to units 1 and
/// 2 in file order. A missing imperfection channel is the identity on the
/// matching MAC input alphabet.
pub fn assemble_discrete(docs: &[ChannelDocument]) -> Result<DiscreteSetup> {
    let err = |line: usize, message: String| ChannelFileError::Invalid { line, message };
    let mut bcc = None;
    let mut mac = None;
    let mut witness = None;
    let mut imps: [Option<ImperfectionChannel>; 2] = [None, None];
    let mut unassigned = Vec::new();
    for doc in docs {
        let line = doc.line.max(1);
        match &doc.item {
            ChannelItem::Bcc(c) => {
                if bcc.replace(c.clone()).is_some() {
                    return Err(err(line, "more than one `bcc` object".into()));
                }
            }
            ChannelItem::Mac(c) => {
                if mac.replace(c.clone()).is_some() {
                    return Err(err(line, "more than one `mac` object".into()));
                }
            }
            ChannelItem::Witness(w) => {
                if witness.replace(w.clone()).is_some() {
                    return Err(err(line, "more than one `witness` object".into()));
                }
            }
            ChannelItem::Imperfection { unit: Some(u), channel } => {
                let slot = &mut imps[*u as usize - 1];
                if slot.replace(channel.clone()).is_some() {
                    return Err(err(line, format!("more than one imperfection channel for unit {u}")));
                }
            }
            ChannelItem::Imperfection { unit: None, channel } => unassigned.push((line, channel.clone())),
            ChannelItem::Gaussian(_) => {
                return Err(err(line, "a `gaussian` object cannot be part of a discrete system".into()))
            }
        }
    }
    for (line, ch) in unassigned {
        match imps.iter_mut().find(|s| s.is_none()) {
            Some(slot) => *slot = Some(ch),
            None => return Err(err(line, "more than two imperfection channels".into())),
        }
    }
    let bcc = bcc.ok_or_else(|| err(1, "missing `bcc` object".into()))?;
    let mac = mac.ok_or_else(|| err(1, "missing `mac` object".into()))?;
    let identity = |size: usize| ImperfectionChannel::identity(size).map_err(|e| err(1, e.to_string()));
    let [imp1, imp2] = imps;
    let imp1 = match imp1 {
        Some(c) => c,
        None => identity(mac.qhat1_size())?,
    };
    let imp2 = match imp2 {
        Some(c) => c,
        None => identity(mac.qhat2_size())?,
    };
    let system = DiscreteSystem::new(bcc, imp1, imp2, mac).map_err(|e| err(1, e.to_string()))?;
    if let Some(w) = &witness {
        let d = w.p_uvx.dims();
        let line = docs
            .iter()
            .find(|d| matches!(d.item, ChannelItem::Witness(_)))
            .map_or(1, |d| d.line.max(1));
        if d[2] != system.bcc.x_size()
            || w.p_q1.len() != system.q1_size()
            || w.p_q2.len() != system.q2_size()
        {
            return Err(err(
                line,
                format!(
                    "witness alphabets (x: {}, q1: {}, q2: {}) do not match the system (x: {}, q1: {}, q2: {})",
                    d[2],
                    w.p_q1.len(),
                    w.p_q2.len(),
                    system.bcc.x_size(),
                    system.q1_size(),
                    system.q2_size()
                ),
            ));
        }
    }
    Ok(DiscreteSetup { system, witness })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"[
  {
    "kind": "bcc",
    "alphabets": { "x": ["0", "1"], "y1": 2, "y2": 2 },
    "cond": [
      [0.81, 0.09, 0.09, 0.01],
      [0.01, 0.09, 0.09, 0.81]
    ]
  },
  {
    "kind": "imperfection",
    "unit": 2,
    "alphabets": { "q": ["off", "on"], "qhat": 2 },
    "cond": [[0.9, 0.1], [0.1, 0.9]]
  },
  {
    "kind": "mac",
    "name": "adder",
    "alphabets": { "qhat1": 2, "qhat2": 2, "s": ["0", "1", "2"] },
    "cond": [1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 1]
  }
]"#;

    #[test]
    fn parses_and_assembles() {
        let docs = parse_channel_file(SAMPLE).unwrap();
        assert_eq!(docs.len(), 3);
        assert_eq!(docs[0].line, 2);
        assert_eq!(docs[1].alphabets[0].labels, vec!["off", "on"]);
        assert_eq!(docs[2].name.as_deref(), Some("adder"));
        let setup = assemble_discrete(&docs).unwrap();
        assert!((setup.system.imp2.prob(0, 1) - 0.1).abs() < 1e-15);
        assert!((setup.system.imp1.prob(0, 0) - 1.0).abs() < 1e-15);
        assert!(setup.witness.is_none());
    }

    #[test]
    fn bad_row_points_at_its_line() {
        let text = SAMPLE.replace("[0.01, 0.09, 0.09, 0.81]", "[0.01, 0.09, 0.09, 0.71]");
        let e = parse_channel_file(&text).unwrap_err();
        assert_eq!(e.line(), Some(7), "{e}");
        assert!(e.to_string().contains("row 1"), "{e}");
    }

    #[test]
    fn negative_entry_points_at_its_line() {
        let text = SAMPLE.replace("[[0.9, 0.1], [0.1, 0.9]]", "[[0.9, 0.1],\n [1.1, -0.1]]");
        let e = parse_channel_file(&text).unwrap_err();
        assert_eq!(e.line(), Some(15), "{e}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let e = parse_channel_file("{\n  \"kind\": \"mac\",\n  oops\n}").unwrap_err();
        assert!(matches!(e, ChannelFileError::Syntax { line: 3, .. }), "{e}");
    }

    #[test]
    fn unknown_kind_and_fields_are_rejected() {
        let e = parse_channel_file("{\"kind\": \"relay\"}").unwrap_err();
        assert!(e.to_string().contains("unknown kind"));
        let e = parse_channel_file("{\n\"kind\": \"gaussian\", \"P\": 1, \"N1\": 1, \"N2\": 2, \"N3\": 1,\n\"alpha1\": 0.5, \"alpha2\": 0.5,\n\"extra\": 1}")
            .unwrap_err();
        assert_eq!(e.line(), Some(4));
    }

    #[test]
    fn gaussian_object() {
        let docs = parse_channel_file(
            r#"{"kind": "gaussian", "P": 10, "N1": 1, "N2": 2, "N3": 5, "alpha1": 0.9, "alpha2": 0.9}"#,
        )
        .unwrap();
        match &docs[0].item {
            ChannelItem::Gaussian(p) => assert_eq!(p.n3, 5.0),
            other => panic!("unexpected {other:?}"),
        }
        let e = parse_channel_file(r#"{"kind": "gaussian", "P": 10, "N1": 3, "N2": 2, "N3": 5, "alpha1": 0.9, "alpha2": 0.9}"#)
            .unwrap_err();
        assert!(e.to_string().contains("N1"), "{e}");
    }

    #[test]
    fn write_then_parse_round_trips() {
        let docs = parse_channel_file(SAMPLE).unwrap();
        let again = parse_channel_file(&write_channel_file(&docs)).unwrap();
        assert_eq!(write_channel_file(&docs), write_channel_file(&again));
        for (a, b) in docs.iter().zip(&again) {
            assert_eq!(a.alphabets, b.alphabets);
            assert_eq!(a.name, b.name);
        }
    }
}
