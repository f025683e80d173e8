//! Instance persistence: line-delimited JSON with a `kind` tag, and a flat CSV
//! of the demand (or value) and capacity tables for inspection.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{BaseInstance, Instance};
use crate::error::Result;
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: u64,
    #[serde(flatten)]
    pub instance: Instance,
}

pub fn write_instances<W: Write>(out: &mut W, records: &[InstanceRecord]) -> Result<()> {
    for r in records {
        jsonl::write_record(out, r)?;
    }
    Ok(())
}

pub fn read_instances<R: BufRead>(input: R) -> Result<Vec<InstanceRecord>> {
    let records: Vec<InstanceRecord> = jsonl::read_records(input)?;
    for r in &records {
        r.instance.validate()?;
    }
    Ok(records)
}

/// One row per (instance, node, item): the realized uncertain parameter and
/// the stage capacity.
pub fn instances_to_csv(records: &[InstanceRecord]) -> String {
    let mut out = String::from("id,kind,stage,node,item,demand_or_value,capacity\n");
    for r in records {
        let view = r.instance.node_view();
        let kind = match (&r.instance, &view.base) {
            (Instance::Stochastic(_), BaseInstance::Mclsp(_)) => "smclsp",
            (Instance::Stochastic(_), BaseInstance::Msmk(_)) => "smsmk",
            (_, BaseInstance::Mclsp(_)) => "mclsp",
            (_, BaseInstance::Msmk(_)) => "msmk",
        };
        for node in 0..view.node_count() {
            let t = view.stage_of(node);
            for j in 0..view.items() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.id,
                    kind,
                    t + 1,
                    node,
                    j,
                    view.overrides[node][j],
                    view.base.capacity()[t]
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_mclsp, generate_msmk, generate_stochastic, MclspRanges, MsmkRanges};

    #[test]
    fn records_round_trip_with_kind_tags() {
        let m = generate_mclsp(1, 2, 3, &MclspRanges::default()).unwrap();
        let k = generate_msmk(1, 2, 3, &MsmkRanges::default()).unwrap();
        let s = generate_stochastic(BaseInstance::Msmk(k.clone()), &[2, 2], 1).unwrap();
        let records = vec![
            InstanceRecord { id: 0, instance: Instance::Mclsp(m) },
            InstanceRecord { id: 1, instance: Instance::Msmk(k) },
            InstanceRecord { id: 2, instance: Instance::Stochastic(s) },
        ];
        let mut buf = Vec::new();
        write_instances(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let kinds: Vec<&str> = text
            .lines()
            .map(|l| {
                let v: serde_json::Value = serde_json::from_str(l).unwrap();
                match v["kind"].as_str().unwrap() {
                    "mclsp" => "mclsp",
                    "msmk" => "msmk",
                    "stoch" => "stoch",
                    other => panic!("unexpected kind {other}"),
                }
            })
            .collect();
        assert_eq!(kinds, ["mclsp", "msmk", "stoch"]);
        assert_eq!(read_instances(&buf[..]).unwrap(), records);
    }

    #[test]
    fn csv_has_one_row_per_node_item() {
        let m = generate_mclsp(1, 2, 3, &MclspRanges::default()).unwrap();
        let csv = instances_to_csv(&[InstanceRecord { id: 7, instance: Instance::Mclsp(m) }]);
        assert_eq!(csv.lines().count(), 1 + 2 * 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("7,mclsp,1,0,0,"));
    }
}
