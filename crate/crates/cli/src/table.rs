use std::collections::BTreeMap;

use traitfuse::train::{aggregate_mse, format_mse};
use traitfuse::Trait;

/// Rows of per-trait MSE with an `Avg` column; the average is shown only
/// when all four traits are present.
pub fn render(label: &str, rows: &[(String, BTreeMap<Trait, f64>)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).chain([label.len()]).max().unwrap_or(0);
    let mut out = format!("{label:<width$}");
    for t in Trait::ALL {
        out.push_str(&format!("  {:>6}", t.letter()));
    }
    out.push_str(&format!("  {:>6}\n", "Avg"));
    for (name, vals) in rows {
        out.push_str(&format!("{name:<width$}"));
        for t in Trait::ALL {
            let cell = vals.get(&t).map_or("-".to_string(), |v| format_mse(*v));
            out.push_str(&format!("  {cell:>6}"));
        }
        let avg = aggregate_mse(vals).map_or("-".to_string(), format_mse);
        out.push_str(&format!("  {avg:>6}\n"));
    }
    out
}
