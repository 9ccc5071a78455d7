// SPDX-License-Identifier: Apache-2.0

use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    /// Shortest round-trip text; empty for missing or non-finite values.
    pub fn csv(&self) -> String {
        match self {
            Cell::Num(x) if x.is_finite() => format!("{x:?}"),
            Cell::Num(_) | Cell::Empty => String::new(),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    pub fn json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub doc: String,
}

pub fn col(name: impl Into<String>, doc: impl Into<String>) -> Column {
    Column { name: name.into(), doc: doc.into() }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub point: usize,
    /// `None` on success, otherwise the failure message.
    pub error: Option<String>,
    pub cells: Vec<Cell>,
}

/// Output of one experiment: a fixed column layout plus rows in point order.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    pub summary: Value,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Self {
        Self { columns, rows: Vec::new(), summary: Value::Null }
    }

    /// Append the rows of one point, or a single failure row.
    pub fn push_point(&mut self, point: usize, result: Result<Vec<Vec<Cell>>, String>) {
        match result {
            Ok(rows) => {
                for cells in rows {
                    debug_assert_eq!(cells.len(), self.columns.len());
                    self.rows.push(Row { point, error: None, cells });
                }
            }
            Err(e) => {
                log::warn!("point {point} failed: {e}");
                let cells = vec![Cell::Empty; self.columns.len()];
                self.rows.push(Row { point, error: Some(e), cells });
            }
        }
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}
