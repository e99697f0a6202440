use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::error::TypeError;

/// Unique device identifier. Ordering is the deterministic iteration order of
/// neighbouring fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct DeviceId(pub u32);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A field calculus value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Bool(bool),
    Text(Arc<str>),
    Tuple(Arc<[Value]>),
    Field(NbrField),
}

/// Neighbouring field: a finite map from devices to local values.
///
/// Neighbouring fields never contain neighbouring fields.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NbrField(BTreeMap<DeviceId, Value>);

impl NbrField {
    pub fn new() -> Self {
        Self(BTreeMap::new())
    }

    pub fn insert(&mut self, device: DeviceId, value: Value) -> Result<(), TypeError> {
        if value.contains_field() {
            return Err(TypeError::NestedField);
        }
        self.0.insert(device, value);
        Ok(())
    }

    pub fn try_from_iter<I: IntoIterator<Item = (DeviceId, Value)>>(
        iter: I,
    ) -> Result<Self, TypeError> {
        let mut field = Self::new();
        for (d, v) in iter {
            field.insert(d, v)?;
        }
        Ok(field)
    }

    pub fn get(&self, device: DeviceId) -> Option<&Value> {
        self.0.get(&device)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entries in ascending device order.
    pub fn iter(&self) -> impl Iterator<Item = (DeviceId, &Value)> {
        self.0.iter().map(|(d, v)| (*d, v))
    }

    pub fn keys(&self) -> impl Iterator<Item = DeviceId> + '_ {
        self.0.keys().copied()
    }

    /// The same field restricted to every device except `device`.
    pub fn without(&self, device: DeviceId) -> Self {
        let mut map = self.0.clone();
        map.remove(&device);
        Self(map)
    }

    /// Pointwise map; the callback must not produce a field.
    pub fn map<F>(&self, mut f: F) -> Result<Self, TypeError>
    where
        F: FnMut(DeviceId, &Value) -> Result<Value, TypeError>,
    {
        Self::try_from_iter(
            self.iter()
                .map(|(d, v)| f(d, v).map(|r| (d, r)))
                .collect::<Result<Vec<_>, _>>()?,
        )
    }

    /// Pointwise combination over the devices present in both fields.
    pub fn zip_with<F>(&self, other: &Self, mut f: F) -> Result<Self, TypeError>
    where
        F: FnMut(&Value, &Value) -> Result<Value, TypeError>,
    {
        let mut out = Self::new();
        for (d, a) in self.iter() {
            if let Some(b) = other.get(d) {
                out.insert(d, f(a, b)?)?;
            }
        }
        Ok(out)
    }
}

impl Value {
    pub fn text(s: &str) -> Self {
        Value::Text(Arc::from(s))
    }

    pub fn tuple<I: IntoIterator<Item = Value>>(items: I) -> Self {
        Value::Tuple(items.into_iter().collect())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Number(_) => "number",
            Value::Bool(_) => "boolean",
            Value::Text(_) => "text",
            Value::Tuple(_) => "tuple",
            Value::Field(_) => "neighbouring-field",
        }
    }

    fn contains_field(&self) -> bool {
        match self {
            Value::Field(_) => true,
            Value::Tuple(items) => items.iter().any(Value::contains_field),
            _ => false,
        }
    }

    fn mismatch(&self, expected: &'static str) -> TypeError {
        TypeError::Mismatch {
            expected,
            found: self.kind(),
        }
    }

    pub fn as_number(&self) -> Result<f64, TypeError> {
        match self {
            Value::Number(n) => Ok(*n),
            other => Err(other.mismatch("number")),
        }
    }

    pub fn as_bool(&self) -> Result<bool, TypeError> {
        match self {
            Value::Bool(b) => Ok(*b),
            other => Err(other.mismatch("boolean")),
        }
    }

    pub fn as_text(&self) -> Result<&str, TypeError> {
        match self {
            Value::Text(t) => Ok(t),
            other => Err(other.mismatch("text")),
        }
    }

    pub fn as_tuple(&self) -> Result<&[Value], TypeError> {
        match self {
            Value::Tuple(items) => Ok(items),
            other => Err(other.mismatch("tuple")),
        }
    }

    pub fn as_field(&self) -> Result<&NbrField, TypeError> {
        match self {
            Value::Field(f) => Ok(f),
            other => Err(other.mismatch("neighbouring-field")),
        }
    }

    /// Element `index` of a tuple.
    pub fn get(&self, index: usize) -> Result<&Value, TypeError> {
        let items = self.as_tuple()?;
        items.get(index).ok_or(TypeError::IndexOutOfBounds {
            index,
            len: items.len(),
        })
    }

    fn numeric(&self, other: &Value, op: &dyn Fn(f64, f64) -> f64) -> Result<Value, TypeError> {
        match (self, other) {
            (Value::Number(a), Value::Number(b)) => Ok(Value::Number(op(*a, *b))),
            (Value::Field(a), Value::Field(b)) => {
                Ok(Value::Field(a.zip_with(b, |x, y| x.numeric(y, op))?))
            }
            (Value::Field(a), scalar @ Value::Number(_)) => {
                Ok(Value::Field(a.map(|_, x| x.numeric(scalar, op))?))
            }
            (scalar @ Value::Number(_), Value::Field(b)) => {
                Ok(Value::Field(b.map(|_, y| scalar.numeric(y, op))?))
            }
            (Value::Number(_), other) | (other, _) => Err(other.mismatch("number")),
        }
    }

    /// Addition, lifted pointwise over neighbouring fields.
    #[allow(clippy::should_implement_trait)]
    pub fn add(&self, other: &Value) -> Result<Value, TypeError> {
        self.numeric(other, &|a, b| a + b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(&self, other: &Value) -> Result<Value, TypeError> {
        self.numeric(other, &|a, b| a - b)
    }

    /// Numeric minimum (not lifted).
    pub fn min_number(&self, other: &Value) -> Result<Value, TypeError> {
        Ok(Value::Number(self.as_number()?.min(other.as_number()?)))
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Number(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::text(s)
    }
}

impl From<NbrField> for Value {
    fn from(f: NbrField) -> Self {
        Value::Field(f)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Text(t) => write!(f, "{t:?}"),
            Value::Tuple(items) => {
                write!(f, "[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "]")
            }
            Value::Field(field) => {
                write!(f, "{{")?;
                for (i, (d, v)) in field.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{d}->{v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}
