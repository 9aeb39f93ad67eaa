use bcmac_cli::table::{format_sig, CSV_DIGITS};
use bcmac_cli::{Cell, Table};
use bcmac_core::prob::LogBase;
use proptest::prelude::*;

fn cell() -> impl Strategy<Value = Cell> {
    prop_oneof![
        any::<u64>().prop_map(Cell::Int),
        prop::num::f64::NORMAL.prop_map(Cell::Num),
        (-1e3f64..1e3).prop_map(Cell::Num),
        any::<bool>().prop_map(Cell::Bool),
        "x[a-z ,\"-]{0,12}".prop_map(Cell::Text),
        Just(Cell::Empty),
    ]
}

fn table() -> impl Strategy<Value = Table> {
    (1usize..6, 0usize..6).prop_flat_map(|(cols, rows)| {
        prop::collection::vec(prop::collection::vec(cell(), cols), rows).prop_map(move |rows| {
            let names: Vec<String> = (0..cols).map(|i| format!("c{i}")).collect();
            let names: Vec<&str> = names.iter().map(String::as_str).collect();
            let mut t = Table::new("random", LogBase::Bits, &names);
            for r in rows {
                t.push(r);
            }
            t
        })
    })
}

/// The value a CSV cell should read back as.
fn rounded(c: &Cell) -> Cell {
    match c {
        Cell::Num(x) => Cell::Num(format_sig(*x, CSV_DIGITS).parse().unwrap()),
        other => other.clone(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn json_round_trips_exactly(t in table()) {
        prop_assert_eq!(Table::from_json(&t.to_json()).unwrap(), t);
    }

    #[test]
    fn csv_round_trips_at_twelve_digits(t in table()) {
        let text = t.to_csv().unwrap();
        let back = Table::from_csv(&text, "random", LogBase::Bits).unwrap();
        prop_assert_eq!(&back.columns, &t.columns);
        prop_assert_eq!(back.rows.len(), t.rows.len());
        for (a, b) in t.rows.iter().zip(&back.rows) {
            let expected: Vec<Cell> = a.iter().map(rounded).collect();
            prop_assert_eq!(&expected, b);
        }
        prop_assert_eq!(back.to_csv().unwrap(), text);
    }

    #[test]
    fn twelve_significant_digits(x in prop::num::f64::NORMAL) {
        let s = format_sig(x, CSV_DIGITS);
        let y: f64 = s.parse().unwrap();
        prop_assert!(((x - y) / x).abs() <= 5e-12, "{} -> {}", x, s);
    }
}
