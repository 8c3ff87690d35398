//! Canonical `path=value` encoding.
//!
//! Every value is flattened into lines of the form `path=value`, joined by a
//! single `\n`. Struct fields appear in declared order, nested fields are
//! prefixed by their dotted field path, and sets (serialized as sorted
//! sequences of scalars) are written inline as `[a,b,c]`. Scalars are:
//!
//! * integers and floats as decimal ASCII,
//! * `true` / `false`,
//! * `~` for an absent optional value,
//! * strings with reserved bytes percent-escaped (`%XX`, upper-case hex).
//!
//! Sequences containing non-scalar items are written element-wise under
//! `path.0`, `path.1`, ... Empty sequences are `[]`, empty maps `{}`.
//!
//! The decoder is typed: it rebuilds a tree of string leaves and lets serde
//! parse each leaf as whatever type the target expects.

use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::de::{self, DeserializeOwned, IntoDeserializer, Visitor};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodingError {
    #[error("value cannot be encoded: {0}")]
    Unencodable(String),
    #[error("empty string inside set at `{0}`")]
    EmptySetElement(String),
    #[error("top-level value must be a struct or map")]
    NotAStruct,
    #[error("malformed canonical text: {0}")]
    Malformed(String),
    #[error("decode error: {0}")]
    Decode(String),
}

impl serde::ser::Error for EncodingError {
    fn custom<T: std::fmt::Display>(msg: T) -> Self {
        EncodingError::Unencodable(msg.to_string())
    }
}

impl de::Error for EncodingError {
    fn custom<T: std::fmt::Display>(msg: T) -> Self {
        EncodingError::Decode(msg.to_string())
    }
}

const RESERVED: &[u8] = b"%=,.[]{}~";

fn needs_escape(ch: char) -> bool {
    ch.is_control() || (ch.is_ascii() && RESERVED.contains(&(ch as u8)))
}

/// Percent-escapes reserved bytes and control characters.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        if needs_escape(ch) {
            let mut buf = [0u8; 4];
            for b in ch.encode_utf8(&mut buf).bytes() {
                let _ = write!(out, "%{b:02X}");
            }
        } else {
            out.push(ch);
        }
    }
    out
}

pub fn unescape(s: &str) -> Result<String, EncodingError> {
    if !s.contains('%') {
        return Ok(s.to_owned());
    }
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = bytes
                .get(i + 1..i + 3)
                .ok_or_else(|| EncodingError::Malformed(format!("truncated escape in `{s}`")))?;
            let hex = std::str::from_utf8(hex)
                .ok()
                .and_then(|h| u8::from_str_radix(h, 16).ok())
                .ok_or_else(|| EncodingError::Malformed(format!("bad escape in `{s}`")))?;
            out.push(hex);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).map_err(|_| EncodingError::Malformed(format!("invalid UTF-8 in `{s}`")))
}

/// Flat list of `(path, encoded value)` pairs in canonical order.
pub type Fields = Vec<(String, String)>;

pub fn to_value<T: Serialize + ?Sized>(value: &T) -> Result<Value, EncodingError> {
    serde_json::to_value(value).map_err(|e| EncodingError::Unencodable(e.to_string()))
}

/// Flattens a serde value rooted at a struct or map.
pub fn to_fields<T: Serialize + ?Sized>(value: &T) -> Result<Fields, EncodingError> {
    let value = to_value(value)?;
    let mut out = Vec::new();
    match &value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&escape(k), v, &mut out)?;
            }
        }
        _ => return Err(EncodingError::NotAStruct),
    }
    Ok(out)
}

fn join_path(prefix: &str, segment: &str) -> String {
    if prefix.is_empty() {
        segment.to_owned()
    } else {
        format!("{prefix}.{segment}")
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("~".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(escape(s)),
        Value::Array(_) | Value::Object(_) => None,
    }
}

/// Appends the flattened form of `v` under `path`.
pub fn flatten(path: &str, v: &Value, out: &mut Fields) -> Result<(), EncodingError> {
    if let Some(s) = scalar(v) {
        out.push((path.to_owned(), s));
        return Ok(());
    }
    match v {
        Value::Array(items) => {
            if items.iter().all(|i| scalar(i).is_some()) {
                let mut s = String::from("[");
                for (n, item) in items.iter().enumerate() {
                    if matches!(item, Value::String(x) if x.is_empty()) {
                        return Err(EncodingError::EmptySetElement(path.to_owned()));
                    }
                    if n > 0 {
                        s.push(',');
                    }
                    s.push_str(&scalar(item).unwrap_or_default());
                }
                s.push(']');
                out.push((path.to_owned(), s));
            } else {
                for (n, item) in items.iter().enumerate() {
                    flatten(&join_path(path, &n.to_string()), item, out)?;
                }
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push((path.to_owned(), "{}".into()));
            }
            for (k, item) in map {
                flatten(&join_path(path, &escape(k)), item, out)?;
            }
        }
        _ => unreachable!("scalars handled above"),
    }
    Ok(())
}

pub fn render(fields: &Fields, sep: char) -> String {
    let mut s = String::new();
    for (n, (k, v)) in fields.iter().enumerate() {
        if n > 0 {
            s.push(sep);
        }
        s.push_str(k);
        s.push('=');
        s.push_str(v);
    }
    s
}

/// Canonical bytes of a struct-like value.
pub fn encode<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, EncodingError> {
    Ok(render(&to_fields(value)?, '\n').into_bytes())
}

pub fn decode<T: DeserializeOwned>(text: &str) -> Result<T, EncodingError> {
    let node = parse_tree(text.split('\n'))?;
    T::deserialize(node)
}

/// Splits `path=value` lines into pairs; the value keeps its escaping.
pub fn parse_fields<'a>(lines: impl Iterator<Item = &'a str>) -> Result<Fields, EncodingError> {
    lines
        .map(|line| {
            line.split_once('=')
                .map(|(k, v)| (k.to_owned(), v.to_owned()))
                .ok_or_else(|| EncodingError::Malformed(format!("line without `=`: `{line}`")))
        })
        .collect()
}

/// Tree of escaped string leaves rebuilt from flattened fields.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf(String),
    Branch(IndexMap<String, Node>),
}

pub fn parse_tree<'a>(lines: impl Iterator<Item = &'a str>) -> Result<Node, EncodingError> {
    tree_from_fields(parse_fields(lines)?)
}

pub fn tree_from_fields(fields: Fields) -> Result<Node, EncodingError> {
    let mut root = IndexMap::new();
    for (path, value) in fields {
        let segments = path
            .split('.')
            .map(unescape)
            .collect::<Result<Vec<_>, _>>()?;
        insert(&mut root, &segments, value, &path)?;
    }
    Ok(Node::Branch(root))
}

fn insert(
    map: &mut IndexMap<String, Node>,
    segments: &[String],
    value: String,
    path: &str,
) -> Result<(), EncodingError> {
    let (head, rest) = segments
        .split_first()
        .ok_or_else(|| EncodingError::Malformed("empty path".into()))?;
    if rest.is_empty() {
        if map.contains_key(head) {
            return Err(EncodingError::Malformed(format!("duplicate path `{path}`")));
        }
        map.insert(head.clone(), Node::Leaf(value));
        return Ok(());
    }
    let child = map
        .entry(head.clone())
        .or_insert_with(|| Node::Branch(IndexMap::new()));
    match child {
        Node::Branch(inner) => insert(inner, rest, value, path),
        Node::Leaf(_) => Err(EncodingError::Malformed(format!("path `{path}` collides with a scalar"))),
    }
}

impl Node {
    fn leaf(&self) -> Result<&str, EncodingError> {
        match self {
            Node::Leaf(s) => Ok(s),
            Node::Branch(_) => Err(EncodingError::Decode("expected a scalar".into())),
        }
    }

    fn parse_leaf<T: std::str::FromStr>(&self, what: &str) -> Result<T, EncodingError> {
        let raw = self.leaf()?;
        raw.parse()
            .map_err(|_| EncodingError::Decode(format!("`{raw}` is not a valid {what}")))
    }

    fn into_seq(self) -> Result<Vec<Node>, EncodingError> {
        match self {
            Node::Leaf(s) => {
                let inner = s
                    .strip_prefix('[')
                    .and_then(|r| r.strip_suffix(']'))
                    .ok_or_else(|| EncodingError::Decode(format!("expected a sequence, got `{s}`")))?;
                if inner.is_empty() {
                    Ok(Vec::new())
                } else {
                    Ok(inner.split(',').map(|x| Node::Leaf(x.to_owned())).collect())
                }
            }
            Node::Branch(map) => {
                let mut items = Vec::with_capacity(map.len());
                for (n, (k, v)) in map.into_iter().enumerate() {
                    if k != n.to_string() {
                        return Err(EncodingError::Decode(format!("sequence index `{k}` out of order")));
                    }
                    items.push(v);
                }
                Ok(items)
            }
        }
    }

    fn into_map(self) -> Result<IndexMap<String, Node>, EncodingError> {
        match self {
            Node::Branch(map) => Ok(map),
            Node::Leaf(s) if s == "{}" => Ok(IndexMap::new()),
            Node::Leaf(s) => Err(EncodingError::Decode(format!("expected a map, got `{s}`"))),
        }
    }
}

macro_rules! parse_num {
    ($($method:ident => $visit:ident : $ty:ty),* $(,)?) => {
        $(
            fn $method<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, Self::Error> {
                visitor.$visit(self.parse_leaf::<$ty>(stringify!($ty))?)
            }
        )*
    };
}

impl<'de> de::Deserializer<'de> for Node {
    type Error = EncodingError;

    fn deserialize_any<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, Self::Error> {
        match &self {
            Node::Leaf(s) if s == "~" => visitor.visit_none(),
            Node::Leaf(s) if s.starts_with('[') => self.deserialize_seq(visitor),
            Node::Leaf(s) if s == "{}" => self.deserialize_map(visitor),
            Node::Leaf(s) => visitor.visit_string(unescape(s)?),
            Node::Branch(map) => {
                if !map.is_empty() && map.keys().enumerate().all(|(n, k)| *k == n.to_string()) {
                    self.deserialize_seq(visitor)
                } else {
                    self.deserialize_map(visitor)
                }
            }
        }
    }

    fn deserialize_bool<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, Self::Error> {
        match self.leaf()? {
            "true" => visitor.visit_bool(true),
            "false" => visitor.visit_bool(false),
            other => Err(EncodingError::Decode(format!("`{other}` is not a bool"))),
        }
    }

    parse_num! {
        deserialize_i8 => visit_i8: i8,
        deserialize_i16 => visit_i16: i16,
        deserialize_i32 => visit_i32: i32,
        deserialize_i64 => visit_i64: i64,
        deserialize_u8 => visit_u8: u8,
        deserialize_u16 => visit_u16: u16,
        deserialize_u32 => visit_u32: u32,
        deserialize_u64 => visit_u64: u64,
        deserialize_f32 => visit_f32: f32,
        deserialize_f64 => visit_f64: f64,
    }

    fn deserialize_char<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, Self::Error> {
        self.deserialize_string(visitor)
    }

    fn deserialize_str<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, Self::Error> {
        self.deserialize_string(visitor)
    }

    fn deserialize_string<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, Self::Error> {
        visitor.visit_string(unescape(self.leaf()?)?)
    }

    fn deserialize_bytes<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, Self::Error> {
        self.deserialize_string(visitor)
    }

    fn deserialize_byte_buf<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, Self::Error> {
        self.deserialize_string(visitor)
    }

    fn deserialize_option<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, Self::Error> {
        match &self {
            Node::Leaf(s) if s == "~" => visitor.visit_none(),
            _ => visitor.visit_some(self),
        }
    }

    fn deserialize_unit<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, Self::Error> {
        match self.leaf()? {
            "~" => visitor.visit_unit(),
            other => Err(EncodingError::Decode(format!("expected unit, got `{other}`"))),
        }
    }

    fn deserialize_unit_struct<V: Visitor<'de>>(
        self,
        _name: &'static str,
        visitor: V,
    ) -> Result<V::Value, Self::Error> {
        self.deserialize_unit(visitor)
    }

    fn deserialize_newtype_struct<V: Visitor<'de>>(
        self,
        _name: &'static str,
        visitor: V,
    ) -> Result<V::Value, Self::Error> {
        visitor.visit_newtype_struct(self)
    }

    fn deserialize_seq<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, Self::Error> {
        visitor.visit_seq(de::value::SeqDeserializer::new(self.into_seq()?.into_iter()))
    }

    fn deserialize_tuple<V: Visitor<'de>>(self, _len: usize, visitor: V) -> Result<V::Value, Self::Error> {
        self.deserialize_seq(visitor)
    }

    fn deserialize_tuple_struct<V: Visitor<'de>>(
        self,
        _name: &'static str,
        _len: usize,
        visitor: V,
    ) -> Result<V::Value, Self::Error> {
        self.deserialize_seq(visitor)
    }

    fn deserialize_map<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, Self::Error> {
        let entries = self.into_map()?.into_iter().map(|(k, v)| (KeyNode(k), v));
        visitor.visit_map(de::value::MapDeserializer::new(entries))
    }

    fn deserialize_struct<V: Visitor<'de>>(
        self,
        _name: &'static str,
        _fields: &'static [&'static str],
        visitor: V,
    ) -> Result<V::Value, Self::Error> {
        self.deserialize_map(visitor)
    }

    fn deserialize_enum<V: Visitor<'de>>(
        self,
        _name: &'static str,
        _variants: &'static [&'static str],
        visitor: V,
    ) -> Result<V::Value, Self::Error> {
        match self {
            Node::Leaf(s) => visitor.visit_enum(unescape(&s)?.into_deserializer()),
            Node::Branch(map) => {
                if map.len() != 1 {
                    return Err(EncodingError::Decode("enum must have exactly one variant key".into()));
                }
                let (variant, content) = map.into_iter().next().expect("length checked");
                visitor.visit_enum(EnumNode { variant, content })
            }
        }
    }

    fn deserialize_identifier<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, Self::Error> {
        self.deserialize_string(visitor)
    }

    fn deserialize_ignored_any<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, Self::Error> {
        visitor.visit_unit()
    }
}

impl<'de> IntoDeserializer<'de, EncodingError> for Node {
    type Deserializer = Node;
    fn into_deserializer(self) -> Node {
        self
    }
}

/// Map keys arrive already unescaped from the path segments.
struct KeyNode(String);

impl<'de> IntoDeserializer<'de, EncodingError> for KeyNode {
    type Deserializer = de::value::StringDeserializer<EncodingError>;
    fn into_deserializer(self) -> Self::Deserializer {
        self.0.into_deserializer()
    }
}

struct EnumNode {
    variant: String,
    content: Node,
}

impl<'de> de::EnumAccess<'de> for EnumNode {
    type Error = EncodingError;
    type Variant = Node;

    fn variant_seed<S: de::DeserializeSeed<'de>>(self, seed: S) -> Result<(S::Value, Node), Self::Error> {
        let v = seed.deserialize(self.variant.into_deserializer())?;
        Ok((v, self.content))
    }
}

impl<'de> de::VariantAccess<'de> for Node {
    type Error = EncodingError;

    fn unit_variant(self) -> Result<(), Self::Error> {
        Ok(())
    }

    fn newtype_variant_seed<S: de::DeserializeSeed<'de>>(self, seed: S) -> Result<S::Value, Self::Error> {
        seed.deserialize(self)
    }

    fn tuple_variant<V: Visitor<'de>>(self, _len: usize, visitor: V) -> Result<V::Value, Self::Error> {
        de::Deserializer::deserialize_seq(self, visitor)
    }

    fn struct_variant<V: Visitor<'de>>(
        self,
        _fields: &'static [&'static str],
        visitor: V,
    ) -> Result<V::Value, Self::Error> {
        de::Deserializer::deserialize_map(self, visitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;
    use std::collections::{BTreeMap, BTreeSet};

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    enum Shape {
        Dot,
        Circle { r: u32 },
        Tagged(String),
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Inner {
        name: String,
        tags: BTreeSet<String>,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Sample {
        seq: u64,
        label: String,
        maybe: Option<u32>,
        inner: Inner,
        shapes: Vec<Shape>,
        scores: BTreeMap<String, f64>,
        empty: Vec<Inner>,
        flag: bool,
    }

    fn sample() -> Sample {
        Sample {
            seq: 7,
            label: "a=b, c.d\nnext %".into(),
            maybe: None,
            inner: Inner {
                name: "x".into(),
                tags: ["zeta", "alpha", "mid"].iter().map(|s| s.to_string()).collect(),
            },
            shapes: vec![Shape::Dot, Shape::Circle { r: 3 }, Shape::Tagged("~".into())],
            scores: [("yes".to_string(), 2.5), ("no".to_string(), 1.0)].into_iter().collect(),
            empty: vec![],
            flag: true,
        }
    }

    #[test]
    fn layout_is_path_value_lines() {
        let text = String::from_utf8(encode(&sample()).unwrap()).unwrap();
        let expected = "seq=7\n\
            label=a%3Db%2C c%2Ed%0Anext %25\n\
            maybe=~\n\
            inner.name=x\n\
            inner.tags=[alpha,mid,zeta]\n\
            shapes.0=Dot\n\
            shapes.1.Circle.r=3\n\
            shapes.2.Tagged=%7E\n\
            scores.no=1.0\n\
            scores.yes=2.5\n\
            empty=[]\n\
            flag=true";
        assert_eq!(text, expected);
    }

    #[test]
    fn decode_inverts_encode() {
        let s = sample();
        let text = String::from_utf8(encode(&s).unwrap()).unwrap();
        let back: Sample = decode(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn empty_string_in_set_is_rejected() {
        let inner = Inner { name: "n".into(), tags: [String::new()].into_iter().collect() };
        assert!(matches!(encode(&inner), Err(EncodingError::EmptySetElement(p)) if p == "tags"));
    }

    #[test]
    fn escape_round_trips_non_ascii_controls() {
        let s = "caf\u{e9} \u{85}tab\t";
        assert_eq!(unescape(&escape(s)).unwrap(), s);
        assert!(!escape(s).contains('\t'));
    }

    #[test]
    fn malformed_escape_is_an_error() {
        assert!(unescape("%G1").is_err());
        assert!(unescape("%4").is_err());
    }
}
