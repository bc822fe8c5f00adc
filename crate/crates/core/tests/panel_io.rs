use proptest::prelude::*;

use hbprobit::data::{
    read_attributes_csv, read_panel_csv, validate_panel, write_attributes_csv, write_panel_csv,
    PanelDataset, RawOccasion,
};
use hbprobit::synth::{generate_panel, synthetic_attributes, GeneratorSpec};

fn occasions(n_brands: usize) -> impl Strategy<Value = Vec<RawOccasion>> {
    prop::collection::vec(
        (
            0usize..5,
            0usize..50,
            0..n_brands,
            prop::collection::vec(1.0f64..500.0, n_brands),
            prop::collection::vec(prop::bool::ANY, n_brands),
        ),
        1..40,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .map(|(h, t, chosen, prices, displays)| RawOccasion {
                household_id: format!("hh-{h}"),
                occasion: t,
                chosen,
                prices,
                displays: displays
                    .into_iter()
                    .map(|d| if d { 1.0 } else { 0.0 })
                    .collect(),
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn panel_csv_round_trips(records in occasions(4)) {
        let dataset = PanelDataset::from_records(records, 4);
        let mut buf = Vec::new();
        write_panel_csv(&dataset, &mut buf).unwrap();
        let back = read_panel_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &dataset);
        prop_assert!(back.occasions().all(|o| o.prices.iter().all(|p| *p > 0.0 && *p <= 1.0)));
    }
}

#[test]
fn synthetic_panel_round_trips_and_validates() {
    let spec = GeneratorSpec {
        n_households: 9,
        n_occasions: 6,
        ..GeneratorSpec::defaults(12)
    };
    let (data, truth) = generate_panel(&spec).unwrap();
    assert!(validate_panel(&data, &truth.attrs).is_empty());
    let mut buf = Vec::new();
    write_panel_csv(&data, &mut buf).unwrap();
    assert_eq!(read_panel_csv(buf.as_slice()).unwrap(), data);

    let attrs = synthetic_attributes();
    let mut buf = Vec::new();
    write_attributes_csv(&attrs, &mut buf).unwrap();
    assert_eq!(read_attributes_csv(buf.as_slice()).unwrap(), attrs);
}
