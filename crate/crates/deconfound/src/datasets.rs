//! The three historic studies shipped with the library.

use deconfound_core::{fixtures, JointTable};

use crate::error::{Error, Result};

pub const BUILTINS: [&str; 3] = ["tuberculosis1910", "streptomycin1948", "kidney1986"];

pub fn builtin(name: &str) -> Result<JointTable> {
    let table = match name {
        "tuberculosis1910" => fixtures::tuberculosis1910(),
        "streptomycin1948" => fixtures::streptomycin1948(),
        "kidney1986" => fixtures::kidney1986(),
        _ => return Err(Error::UnknownDataset(name.into())),
    };
    Ok(table?)
}

/// One line per builtin: name, N and the variables with roles and levels.
pub fn describe_builtins() -> Result<String> {
    let mut out = String::new();
    for name in BUILTINS {
        let t = builtin(name)?;
        out.push_str(&format!("{name}  N={}\n", t.total()));
        for v in t.schema().variables() {
            out.push_str(&format!(
                "  {} ({}): {}\n",
                v.name(),
                v.role().as_str(),
                v.levels().join(" | ")
            ));
        }
    }
    Ok(out)
}
