//! Historic study tables embedded verbatim.
//!
//! Level orderings follow the published tables so cell indices stay stable.

use alloc::vec;

use crate::error::Result;
use crate::table::{JointTable, Role, Schema, Variable};

/// 1910 tuberculosis mortality, New York vs Richmond, by ethnicity (N = 4,894,511).
pub fn tuberculosis1910() -> Result<JointTable> {
    let schema = Schema::new(vec![
        Variable::new("outcome", Role::Outcome, ["survived", "died"])?,
        Variable::new("place", Role::Independent, ["New York", "Richmond"])?,
        Variable::new("ethnicity", Role::Confounder, ["African American", "White"])?,
    ])?;
    JointTable::build(
        schema,
        [
            (["survived", "New York", "African American"], 91_196.0),
            (["survived", "New York", "White"], 4_666_809.0),
            (["survived", "Richmond", "African American"], 46_578.0),
            (["survived", "Richmond", "White"], 80_764.0),
            (["died", "New York", "African American"], 513.0),
            (["died", "New York", "White"], 8_365.0),
            (["died", "Richmond", "African American"], 155.0),
            (["died", "Richmond", "White"], 131.0),
        ],
    )
}

/// 1948 streptomycin trial, by gender and baseline condition (N = 107).
pub fn streptomycin1948() -> Result<JointTable> {
    let schema = Schema::new(vec![
        Variable::new("gender", Role::Confounder, ["female", "male"])?,
        Variable::new("baseline", Role::Confounder, ["good", "fair", "poor"])?,
        Variable::new("improvement", Role::Outcome, ["not improved", "improved"])?,
        Variable::new("treatment", Role::Independent, ["control", "streptomycin"])?,
    ])?;
    // (gender, baseline, improvement): [control, streptomycin]
    let rows: [(&str, &str, &str, [f64; 2]); 12] = [
        ("female", "good", "not improved", [0.0, 0.0]),
        ("female", "good", "improved", [4.0, 4.0]),
        ("female", "fair", "not improved", [5.0, 2.0]),
        ("female", "fair", "improved", [5.0, 8.0]),
        ("female", "poor", "not improved", [14.0, 10.0]),
        ("female", "poor", "improved", [0.0, 7.0]),
        ("male", "good", "not improved", [0.0, 0.0]),
        ("male", "good", "improved", [4.0, 4.0]),
        ("male", "fair", "not improved", [6.0, 1.0]),
        ("male", "fair", "improved", [4.0, 6.0]),
        ("male", "poor", "not improved", [10.0, 4.0]),
        ("male", "poor", "improved", [0.0, 9.0]),
    ];
    JointTable::build(
        schema,
        rows.iter().flat_map(|&(g, b, y, counts)| {
            [
                ([g, b, y, "control"], counts[0]),
                ([g, b, y, "streptomycin"], counts[1]),
            ]
        }),
    )
}

/// 1986 renal calculi study, four treatments by stone size (N = 985).
///
/// Ureterolithotomy and the combined method are left out because their
/// stone sizes were not recorded.
pub fn kidney1986() -> Result<JointTable> {
    let schema = Schema::new(vec![
        Variable::new(
            "treatment",
            Role::Independent,
            [
                "ESWL",
                "nephrolithotomy/pyelolithotomy",
                "percutaneous nephrolithotomy",
                "pyelolithotomy",
            ],
        )?,
        Variable::new("stone_size", Role::Confounder, ["large", "small"])?,
        Variable::new("outcome", Role::Outcome, ["unsuccessful", "successful"])?,
    ])?;
    // (treatment, size): [unsuccessful, successful]
    let rows: [(&str, &str, [f64; 2]); 8] = [
        ("ESWL", "large", [23.0, 101.0]),
        ("ESWL", "small", [4.0, 200.0]),
        ("nephrolithotomy/pyelolithotomy", "large", [64.0, 154.0]),
        ("nephrolithotomy/pyelolithotomy", "small", [1.0, 12.0]),
        ("percutaneous nephrolithotomy", "large", [25.0, 55.0]),
        ("percutaneous nephrolithotomy", "small", [36.0, 234.0]),
        ("pyelolithotomy", "large", [7.0, 38.0]),
        ("pyelolithotomy", "small", [5.0, 26.0]),
    ];
    JointTable::build(
        schema,
        rows.iter().flat_map(|&(x, s, counts)| {
            [
                ([x, s, "unsuccessful"], counts[0]),
                ([x, s, "successful"], counts[1]),
            ]
        }),
    )
}
