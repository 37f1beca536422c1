//! Structure-of-arrays table.
//!
//! Each column lives in its own contiguous vector; a row is materialized as a
//! tuple of [`Value`]s only when asked for. Columns can be real, integer or
//! boolean, and there is no limit on their number.

use std::fmt;

use thiserror::Error;

use crate::param::is_identifier;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoreError {
    #[error("schema must have at least one column")]
    EmptySchema,
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("column name `{0}` must match [A-Za-z0-9_]+")]
    InvalidName(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("row has {got} values, schema has {expected} columns")]
    Arity { expected: usize, got: usize },
    #[error("column `{column}` holds {expected}, got {got}")]
    KindMismatch {
        column: String,
        expected: ColumnKind,
        got: ColumnKind,
    },
    #[error("row {index} out of range for store of length {len}")]
    OutOfRange { index: usize, len: usize },
    #[error("column `{column}` has length {got}, expected {expected}")]
    LengthMismatch {
        column: String,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnKind {
    Real64,
    Integer64,
    Boolean,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnKind::Real64 => "real64",
            ColumnKind::Integer64 => "integer64",
            ColumnKind::Boolean => "boolean",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Real64(f64),
    Integer64(i64),
    Boolean(bool),
}

impl Value {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Value::Real64(_) => ColumnKind::Real64,
            Value::Integer64(_) => ColumnKind::Integer64,
            Value::Boolean(_) => ColumnKind::Boolean,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match *self {
            Value::Real64(x) => Some(x),
            _ => None,
        }
    }

    pub fn as_integer(&self) -> Option<i64> {
        match *self {
            Value::Integer64(x) => Some(x),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Value::Boolean(x) => Some(x),
            _ => None,
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real64(x)
    }
}

impl From<i64> for Value {
    fn from(x: i64) -> Self {
        Value::Integer64(x)
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Boolean(x)
    }
}

/// Ordered, uniquely named column list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSchema {
    columns: Vec<(String, ColumnKind)>,
}

impl ColumnSchema {
    pub fn new<S: Into<String>>(
        columns: impl IntoIterator<Item = (S, ColumnKind)>,
    ) -> Result<Self, StoreError> {
        let columns: Vec<(String, ColumnKind)> =
            columns.into_iter().map(|(n, k)| (n.into(), k)).collect();
        if columns.is_empty() {
            return Err(StoreError::EmptySchema);
        }
        for (i, (name, _)) in columns.iter().enumerate() {
            if !is_identifier(name) {
                return Err(StoreError::InvalidName(name.clone()));
            }
            if columns[..i].iter().any(|(n, _)| n == name) {
                return Err(StoreError::DuplicateColumn(name.clone()));
            }
        }
        Ok(Self { columns })
    }

    /// All columns of the same kind.
    pub fn homogeneous<S: Into<String>>(
        names: impl IntoIterator<Item = S>,
        kind: ColumnKind,
    ) -> Result<Self, StoreError> {
        Self::new(names.into_iter().map(|n| (n, kind)))
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|(n, _)| n == name)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.columns[index].0
    }

    pub fn kind(&self, index: usize) -> ColumnKind {
        self.columns[index].1
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ColumnKind)> {
        self.columns.iter().map(|(n, k)| (n.as_str(), *k))
    }
}

/// Owned data of one column.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Real64(Vec<f64>),
    Integer64(Vec<i64>),
    Boolean(Vec<bool>),
}

impl Column {
    fn empty(kind: ColumnKind, capacity: usize) -> Self {
        match kind {
            ColumnKind::Real64 => Column::Real64(Vec::with_capacity(capacity)),
            ColumnKind::Integer64 => Column::Integer64(Vec::with_capacity(capacity)),
            ColumnKind::Boolean => Column::Boolean(Vec::with_capacity(capacity)),
        }
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            Column::Real64(_) => ColumnKind::Real64,
            Column::Integer64(_) => ColumnKind::Integer64,
            Column::Boolean(_) => ColumnKind::Boolean,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Column::Real64(v) => v.len(),
            Column::Integer64(v) => v.len(),
            Column::Boolean(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Value {
        match self {
            Column::Real64(v) => Value::Real64(v[i]),
            Column::Integer64(v) => Value::Integer64(v[i]),
            Column::Boolean(v) => Value::Boolean(v[i]),
        }
    }

    fn push(&mut self, value: Value) {
        match (self, value) {
            (Column::Real64(v), Value::Real64(x)) => v.push(x),
            (Column::Integer64(v), Value::Integer64(x)) => v.push(x),
            (Column::Boolean(v), Value::Boolean(x)) => v.push(x),
            _ => unreachable!("kind checked by caller"),
        }
    }

    fn select(&self, keep: &[usize]) -> Column {
        match self {
            Column::Real64(v) => Column::Real64(keep.iter().map(|&i| v[i]).collect()),
            Column::Integer64(v) => Column::Integer64(keep.iter().map(|&i| v[i]).collect()),
            Column::Boolean(v) => Column::Boolean(keep.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Read-only view of one column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColumnView<'a> {
    Real64(&'a [f64]),
    Integer64(&'a [i64]),
    Boolean(&'a [bool]),
}

impl ColumnView<'_> {
    pub fn len(&self) -> usize {
        match self {
            ColumnView::Real64(v) => v.len(),
            ColumnView::Integer64(v) => v.len(),
            ColumnView::Boolean(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Option<Value> {
        match self {
            ColumnView::Real64(v) => v.get(i).copied().map(Value::Real64),
            ColumnView::Integer64(v) => v.get(i).copied().map(Value::Integer64),
            ColumnView::Boolean(v) => v.get(i).copied().map(Value::Boolean),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStore {
    schema: ColumnSchema,
    columns: Vec<Column>,
    len: usize,
}

impl ColumnStore {
    pub fn new(schema: ColumnSchema, capacity_hint: usize) -> Self {
        let columns = schema
            .iter()
            .map(|(_, k)| Column::empty(k, capacity_hint))
            .collect();
        Self {
            schema,
            columns,
            len: 0,
        }
    }

    /// Assembles a store from fully built columns, e.g. the output of a bulk generator.
    pub fn from_columns(schema: ColumnSchema, columns: Vec<Column>) -> Result<Self, StoreError> {
        if columns.len() != schema.len() {
            return Err(StoreError::Arity {
                expected: schema.len(),
                got: columns.len(),
            });
        }
        let len = columns.first().map_or(0, Column::len);
        for (i, col) in columns.iter().enumerate() {
            if col.kind() != schema.kind(i) {
                return Err(StoreError::KindMismatch {
                    column: schema.name(i).to_string(),
                    expected: schema.kind(i),
                    got: col.kind(),
                });
            }
            if col.len() != len {
                return Err(StoreError::LengthMismatch {
                    column: schema.name(i).to_string(),
                    expected: len,
                    got: col.len(),
                });
            }
        }
        Ok(Self {
            schema,
            columns,
            len,
        })
    }

    /// Store of real columns, named in order.
    pub fn from_real_columns<S: Into<String>>(
        names: impl IntoIterator<Item = S>,
        data: Vec<Vec<f64>>,
    ) -> Result<Self, StoreError> {
        let schema = ColumnSchema::homogeneous(names, ColumnKind::Real64)?;
        Self::from_columns(schema, data.into_iter().map(Column::Real64).collect())
    }

    pub fn schema(&self) -> &ColumnSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, row: &[Value]) -> Result<(), StoreError> {
        if row.len() != self.schema.len() {
            return Err(StoreError::Arity {
                expected: self.schema.len(),
                got: row.len(),
            });
        }
        for (i, v) in row.iter().enumerate() {
            if v.kind() != self.schema.kind(i) {
                return Err(StoreError::KindMismatch {
                    column: self.schema.name(i).to_string(),
                    expected: self.schema.kind(i),
                    got: v.kind(),
                });
            }
        }
        for (col, &v) in self.columns.iter_mut().zip(row) {
            col.push(v);
        }
        self.len += 1;
        Ok(())
    }

    pub fn row(&self, i: usize) -> Result<Vec<Value>, StoreError> {
        if i >= self.len {
            return Err(StoreError::OutOfRange {
                index: i,
                len: self.len,
            });
        }
        Ok(self.columns.iter().map(|c| c.get(i)).collect())
    }

    pub fn column(&self, name: &str) -> Result<ColumnView<'_>, StoreError> {
        let idx = self
            .schema
            .index_of(name)
            .ok_or_else(|| StoreError::UnknownColumn(name.to_string()))?;
        Ok(self.column_at(idx))
    }

    pub fn column_at(&self, index: usize) -> ColumnView<'_> {
        match &self.columns[index] {
            Column::Real64(v) => ColumnView::Real64(v),
            Column::Integer64(v) => ColumnView::Integer64(v),
            Column::Boolean(v) => ColumnView::Boolean(v),
        }
    }

    /// Real column as a plain slice.
    pub fn real_column(&self, name: &str) -> Result<&[f64], StoreError> {
        match self.column(name)? {
            ColumnView::Real64(v) => Ok(v),
            other => Err(StoreError::KindMismatch {
                column: name.to_string(),
                expected: ColumnKind::Real64,
                got: match other {
                    ColumnView::Integer64(_) => ColumnKind::Integer64,
                    _ => ColumnKind::Boolean,
                },
            }),
        }
    }

    /// Several real columns at once, in the requested order.
    pub fn real_columns(&self, names: &[&str]) -> Result<Vec<&[f64]>, StoreError> {
        names.iter().map(|n| self.real_column(n)).collect()
    }

    /// New store with exactly the rows accepted by `predicate`, in order.
    pub fn filter(&self, mut predicate: impl FnMut(&[Value]) -> bool) -> ColumnStore {
        let mut row = Vec::with_capacity(self.columns.len());
        let keep: Vec<usize> = (0..self.len)
            .filter(|&i| {
                row.clear();
                row.extend(self.columns.iter().map(|c| c.get(i)));
                predicate(&row)
            })
            .collect();
        ColumnStore {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(&keep)).collect(),
            len: keep.len(),
        }
    }

    /// Appends a column of matching length.
    pub fn add_column(&mut self, name: &str, column: Column) -> Result<(), StoreError> {
        if column.len() != self.len {
            return Err(StoreError::LengthMismatch {
                column: name.to_string(),
                expected: self.len,
                got: column.len(),
            });
        }
        let mut cols: Vec<(String, ColumnKind)> = self
            .schema
            .iter()
            .map(|(n, k)| (n.to_string(), k))
            .collect();
        cols.push((name.to_string(), column.kind()));
        self.schema = ColumnSchema::new(cols)?;
        self.columns.push(column);
        Ok(())
    }

    pub fn into_columns(self) -> (ColumnSchema, Vec<Column>) {
        (self.schema, self.columns)
    }
}
