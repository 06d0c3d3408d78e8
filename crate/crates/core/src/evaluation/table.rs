//! Fixed-width text and JSON rendering of metric grids.

use serde_json::{Map, Value};

use super::EvalError;

/// A titled grid of optional values: one row per metric, one column per model
/// (or threshold, or ablated layer).
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub corner: String,
    pub columns: Vec<String>,
    pub rows: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

pub const UNDEFINED: &str = "undefined";

impl Table {
    pub fn new(
        title: impl Into<String>,
        corner: impl Into<String>,
        columns: Vec<String>,
        rows: Vec<String>,
        values: Vec<Vec<Option<f64>>>,
    ) -> Result<Self, EvalError> {
        if values.len() != rows.len() || values.iter().any(|r| r.len() != columns.len()) {
            return Err(EvalError::ShapeMismatch(format!(
                "value grid does not match {} rows x {} columns",
                rows.len(),
                columns.len()
            )));
        }
        Ok(Table {
            title: title.into(),
            corner: corner.into(),
            columns,
            rows,
            values,
        })
    }

    pub fn render(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .values
            .iter()
            .map(|r| r.iter().map(|v| format_value(*v)).collect())
            .collect();
        let mut widths = vec![self.corner.chars().count()];
        widths.extend(self.columns.iter().map(|c| c.chars().count()));
        for (ri, row) in self.rows.iter().enumerate() {
            widths[0] = widths[0].max(row.chars().count());
            for (ci, cell) in cells[ri].iter().enumerate() {
                widths[ci + 1] = widths[ci + 1].max(cell.len());
            }
        }
        let line = |first: &str, rest: &[String]| {
            let mut parts = vec![pad(first, widths[0])];
            parts.extend(rest.iter().enumerate().map(|(i, s)| pad(s, widths[i + 1])));
            parts.join(" | ").trim_end().to_owned()
        };

        let mut out = String::new();
        out.push_str(&self.title);
        out.push('\n');
        out.push_str(&line(&self.corner, &self.columns));
        out.push('\n');
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&rule.join("-+-"));
        out.push('\n');
        for (ri, row) in self.rows.iter().enumerate() {
            out.push_str(&line(row, &cells[ri]));
            out.push('\n');
        }
        out
    }

    /// `{"row": {"column": value | null}}`, preserving order.
    pub fn to_json(&self) -> Value {
        let mut outer = Map::new();
        for (ri, row) in self.rows.iter().enumerate() {
            let mut inner = Map::new();
            for (ci, col) in self.columns.iter().enumerate() {
                let v = self.values[ri][ci]
                    .and_then(serde_json::Number::from_f64)
                    .map(Value::Number)
                    .unwrap_or(Value::Null);
                inner.insert(col.clone(), v);
            }
            outer.insert(row.clone(), Value::Object(inner));
        }
        Value::Object(outer)
    }
}

fn pad(s: &str, width: usize) -> String {
    format!("{s:<width$}")
}

/// Five decimal places, or `undefined`.
pub fn format_value(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.5}"),
        None => UNDEFINED.to_owned(),
    }
}

/// Render a grid in one step; see [`Table::render`].
pub fn render_table(
    title: &str,
    corner: &str,
    columns: &[&str],
    rows: &[&str],
    values: Vec<Vec<Option<f64>>>,
) -> Result<String, EvalError> {
    let t = Table::new(
        title,
        corner,
        columns.iter().map(|s| s.to_string()).collect(),
        rows.iter().map(|s| s.to_string()).collect(),
        values,
    )?;
    Ok(t.render())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell() {
        let s = render_table("T", "Metric", &["M"], &["IoU"], vec![vec![Some(0.5)]]).unwrap();
        assert_eq!(s, "T\nMetric | M\n-------+--------\nIoU    | 0.50000\n");
    }

    #[test]
    fn undefined_and_shape_errors() {
        let s = render_table("T", "", &["a", "b"], &["r"], vec![vec![None, Some(1.0)]]).unwrap();
        assert!(s.lines().last().unwrap().contains("undefined | 1.00000"));
        assert!(render_table("T", "", &["a"], &["r"], vec![vec![None, None]]).is_err());
        assert!(render_table("T", "", &["a"], &["r", "s"], vec![vec![None]]).is_err());
    }

    #[test]
    fn json_shape() {
        let t = Table::new(
            "T",
            "Metric",
            vec!["A".into(), "B".into()],
            vec!["IoU".into()],
            vec![vec![Some(0.25), None]],
        )
        .unwrap();
        assert_eq!(t.to_json().to_string(), r#"{"IoU":{"A":0.25,"B":null}}"#);
    }
}
