use std::collections::HashMap;
use std::fmt;

use super::{Layer, Sequential};
use crate::tensor::Scalar;

/// One row of the architecture table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSummary {
    /// Keras-style instance name, e.g. `conv2d_1`.
    pub name: String,
    /// Layer class, e.g. `Conv2D`.
    pub kind: &'static str,
    pub output_shape: Vec<usize>,
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub rows: Vec<LayerSummary>,
    pub total_params: usize,
    pub trainable_params: usize,
    pub non_trainable_params: usize,
}

fn kind_and_base<T: Scalar>(layer: &Layer<T>) -> (&'static str, &'static str) {
    match layer {
        Layer::Conv2D(_) => ("Conv2D", "conv2d"),
        Layer::MaxPool2D(_) => ("MaxPooling2D", "max_pooling2d"),
        Layer::Dropout(_) => ("Dropout", "dropout"),
        Layer::Flatten(_) => ("Flatten", "flatten"),
        Layer::Dense(_) => ("Dense", "dense"),
    }
}

pub(super) fn summarize<T: Scalar>(model: &Sequential<T>) -> Summary {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let rows: Vec<LayerSummary> = model
        .layers()
        .iter()
        .zip(model.shapes())
        .map(|(layer, output_shape)| {
            let (kind, base) = kind_and_base(layer);
            let n = seen.entry(base).or_default();
            let name = if *n == 0 {
                base.to_string()
            } else {
                format!("{base}_{n}")
            };
            *n += 1;
            LayerSummary {
                name,
                kind,
                output_shape,
                params: layer.param_count(),
            }
        })
        .collect();
    let total: usize = rows.iter().map(|r| r.params).sum();
    Summary {
        rows,
        total_params: total,
        trainable_params: total,
        non_trainable_params: 0,
    }
}

/// `1234567` → `1,234,567`.
pub fn group_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn shape_text(shape: &[usize]) -> String {
    let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
    format!("(None, {})", dims.join(", "))
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rule = "=".repeat(65);
        writeln!(f, "{:<32}{:<25}Param #", "Layer (type)", "Output Shape")?;
        writeln!(f, "{rule}")?;
        for row in &self.rows {
            let label = format!("{} ({})", row.name, row.kind);
            writeln!(f, "{label:<32}{:<25}{}", shape_text(&row.output_shape), row.params)?;
        }
        writeln!(f, "{rule}")?;
        writeln!(f, "Trainable params: {}", group_thousands(self.trainable_params))?;
        writeln!(f, "Non-trainable params: {}", group_thousands(self.non_trainable_params))?;
        writeln!(f, "Total params: {}", group_thousands(self.total_params))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, Preset};

    #[test]
    fn thousands_grouping() {
        assert_eq!(group_thousands(0), "0");
        assert_eq!(group_thousands(260), "260");
        assert_eq!(group_thousands(9248), "9,248");
        assert_eq!(group_thousands(13_873_572), "13,873,572");
    }

    #[test]
    fn keras_style_names() {
        let s = build_model::<f32>(Preset::Tiny, 0).unwrap().summary();
        let names: Vec<&str> = s.rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "conv2d", "conv2d_1", "max_pooling2d", "conv2d_2", "max_pooling2d_1", "conv2d_3",
                "max_pooling2d_2", "dropout", "flatten", "dense", "dropout_1", "dense_1"
            ]
        );
        assert_eq!(s.non_trainable_params, 0);
    }
}
