use std::io::Cursor;

use deconfound::csv_io::{load_csv, read_csv, roles_of, save_csv, write_csv, TableFileSpec};
use deconfound::datasets::{builtin, BUILTINS};
use deconfound::Error;
use deconfound_core::projection::StudyLayout;
use deconfound_core::{pr_projection, Role};

fn tb_roles() -> Vec<(String, Role)> {
    vec![
        ("outcome".into(), Role::Outcome),
        ("place".into(), Role::Independent),
        ("ethnicity".into(), Role::Confounder),
    ]
}

fn spec(roles: Vec<(String, Role)>) -> TableFileSpec {
    TableFileSpec::new("<memory>", roles)
}

const TABLE1: &str = "outcome,place,ethnicity,count
survived,New York,African American,91196
survived,New York,White,4666809
survived,Richmond,African American,46578
survived,Richmond,White,80764
died,New York,African American,513
died,New York,White,8365
died,Richmond,African American,155
died,Richmond,White,131
";

#[test]
fn table1_csv_loads_with_expected_total() {
    let t = read_csv(Cursor::new(TABLE1), &spec(tb_roles())).unwrap();
    assert_eq!(t.total(), 4_894_511.0);
    assert_eq!(t, builtin("tuberculosis1910").unwrap());
}

#[test]
fn crlf_and_column_order_are_accepted() {
    let text = "count,ethnicity,place,outcome\r\n5,a,x,y0\r\n7,b,x,y1\r\n1,a,z,y1\r\n2,b,z,y0\r\n";
    let t = read_csv(Cursor::new(text), &spec(tb_roles())).unwrap();
    assert_eq!(t.total(), 15.0);
    let names: Vec<&str> = t.schema().variables().iter().map(|v| v.name()).collect();
    assert_eq!(names, ["ethnicity", "place", "outcome"]);
    assert_eq!(t.schema().variable(2).levels(), ["y0", "y1"]);
}

#[test]
fn zero_rows_extend_the_domain_but_not_the_support() {
    let text =
        "outcome,place,ethnicity,count\nno,a,s1,3\nyes,a,s1,0\nno,b,s1,2\nno,a,s2,1\nno,b,s2,4\n";
    let t = read_csv(Cursor::new(text), &spec(tb_roles())).unwrap();
    let y = t.schema().position("outcome").unwrap();
    assert_eq!(t.schema().variable(y).levels(), ["no", "yes"]);
    assert_eq!(t.support().levels(y), &[0]);
}

#[test]
fn duplicates_need_the_merge_flag() {
    let text = "outcome,place,ethnicity,count\nno,a,s,3\nyes,b,s,1\nno,a,s,2\n";
    let err = read_csv(Cursor::new(text), &spec(tb_roles())).unwrap_err();
    assert!(matches!(err, Error::DuplicateRow { line: 4, .. }), "{err}");
    let t = read_csv(Cursor::new(text), &spec(tb_roles()).merging()).unwrap();
    assert_eq!(t.total(), 6.0);
}

#[test]
fn bad_counts_and_columns_are_rejected() {
    let negative = "outcome,place,ethnicity,count\nno,a,s,-3\n";
    assert!(matches!(
        read_csv(Cursor::new(negative), &spec(tb_roles())),
        Err(Error::InvalidCount { line: 2, .. })
    ));
    let fractional = "outcome,place,ethnicity,count\nno,a,s,2.5\n";
    assert!(matches!(
        read_csv(Cursor::new(fractional), &spec(tb_roles())),
        Err(Error::InvalidCount { .. })
    ));
    let whole_float = "outcome,place,ethnicity,count\nno,a,s,2.0\nyes,b,t,1\n";
    assert_eq!(
        read_csv(Cursor::new(whole_float), &spec(tb_roles()))
            .unwrap()
            .total(),
        3.0
    );

    let missing = "outcome,place,count\nno,a,1\n";
    assert!(matches!(
        read_csv(Cursor::new(missing), &spec(tb_roles())),
        Err(Error::MissingColumn(c)) if c == "ethnicity"
    ));
    let extra = "outcome,place,ethnicity,id,count\nno,a,s,1,1\n";
    assert!(matches!(
        read_csv(Cursor::new(extra), &spec(tb_roles())),
        Err(Error::UnmappedColumn(c)) if c == "id"
    ));
    let no_count = "outcome,place,ethnicity\nno,a,s\n";
    assert!(matches!(
        read_csv(Cursor::new(no_count), &spec(tb_roles())),
        Err(Error::MissingColumn(c)) if c == "count"
    ));
    let header_only = "outcome,place,ethnicity,count\n";
    assert!(matches!(
        read_csv(Cursor::new(header_only), &spec(tb_roles())),
        Err(Error::Empty)
    ));
}

#[test]
fn roles_must_form_a_study() {
    let text = "outcome,place,ethnicity,count\nno,a,s,1\n";
    let roles = vec![
        ("outcome".into(), Role::Outcome),
        ("place".into(), Role::Independent),
        ("ethnicity".into(), Role::Independent),
    ];
    assert!(matches!(
        read_csv(Cursor::new(text), &spec(roles)),
        Err(Error::Core(deconfound_core::Error::MissingRole(
            "confounder"
        )))
    ));
}

#[test]
fn microdata_rows_are_counted() {
    let text = "outcome,place,ethnicity\nno,a,s\nno,a,s\nyes,b,s\nno,b,t\n";
    let t = read_csv(Cursor::new(text), &spec(tb_roles()).microdata()).unwrap();
    assert_eq!(t.total(), 4.0);
    assert_eq!(
        t.weights()[t.schema().cell_of(&["no", "a", "s"]).unwrap()],
        2.0
    );
}

#[test]
fn builtins_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for (name, n) in BUILTINS.iter().zip([4_894_511.0, 107.0, 985.0]) {
        let t = builtin(name).unwrap();
        assert_eq!(t.total(), n);
        let path = dir.path().join(format!("{name}.csv"));
        save_csv(&t, &path, "count").unwrap();
        let back = load_csv(&TableFileSpec::new(&path, roles_of(t.schema()))).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.support(), t.support());
    }
    assert!(matches!(
        builtin("covid2020"),
        Err(Error::UnknownDataset(_))
    ));
}

#[test]
fn builtin_spot_cells() {
    let cell = |name: &str, labels: &[&str]| {
        let t = builtin(name).unwrap();
        t.weights()[t.schema().cell_of(labels).unwrap()]
    };
    assert_eq!(
        cell(
            "tuberculosis1910",
            &["died", "Richmond", "African American"]
        ),
        155.0
    );
    assert_eq!(
        cell(
            "streptomycin1948",
            &["female", "poor", "not improved", "control"]
        ),
        14.0
    );
    assert_eq!(
        cell(
            "kidney1986",
            &["nephrolithotomy/pyelolithotomy", "small", "unsuccessful"]
        ),
        1.0
    );
}

#[test]
fn write_is_deterministic() {
    let t = builtin("streptomycin1948").unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_csv(&t, &mut a, "n").unwrap();
    write_csv(&t, &mut b, "n").unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("gender,baseline,improvement,treatment,n\n"));
    assert_eq!(text.lines().count(), 1 + 24);
}

fn covid_spec() -> TableFileSpec {
    TableFileSpec::new(
        concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/tests/data/covid_synthetic.csv"
        ),
        vec![
            ("country".into(), Role::Independent),
            ("age".into(), Role::Confounder),
            ("outcome".into(), Role::Outcome),
        ],
    )
}

#[test]
fn covid_shaped_table_loads_and_projects() {
    let f = load_csv(&covid_spec()).unwrap();
    let sizes: Vec<usize> = f.schema().variables().iter().map(|v| v.len()).collect();
    assert_eq!(sizes, [7, 9, 2]);
    let r = pr_projection(&f.normalize().unwrap()).unwrap();
    assert!(r.converged);
    assert!(
        r.residuals[0] <= 1e-10,
        "parity residual {}",
        r.residuals[0]
    );

    let layout = StudyLayout::of(&f).unwrap();
    let fs = f.marginal(&layout.s).unwrap().normalize().unwrap();
    let qxs = r.q.conditional(&layout.s, &layout.x).unwrap();
    for x in 0..7 {
        let row = qxs.distribution(x).unwrap();
        for (a, b) in row.iter().zip(fs.weights()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}
