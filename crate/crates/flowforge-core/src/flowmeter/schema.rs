//! The output schema: CICFlowMeter v3 column names, in the tool's order.
//! The list is pinned by a checked-in header fixture; note the tool's own
//! inconsistency "CWE Flag Count" (spelled out) among the "* Flag Cnt"
//! columns, which is part of the format.

use crate::table::DType;

/// All 84 output columns in order: 7 identification columns, 76 numeric
/// features, and the trailing Label.
pub const SCHEMA: [&str; 84] = [
    "Flow ID",
    "Src IP",
    "Src Port",
    "Dst IP",
    "Dst Port",
    "Protocol",
    "Timestamp",
    "Flow Duration",
    "Tot Fwd Pkts",
    "Tot Bwd Pkts",
    "TotLen Fwd Pkts",
    "TotLen Bwd Pkts",
    "Fwd Pkt Len Max",
    "Fwd Pkt Len Min",
    "Fwd Pkt Len Mean",
    "Fwd Pkt Len Std",
    "Bwd Pkt Len Max",
    "Bwd Pkt Len Min",
    "Bwd Pkt Len Mean",
    "Bwd Pkt Len Std",
    "Flow Byts/s",
    "Flow Pkts/s",
    "Flow IAT Mean",
    "Flow IAT Std",
    "Flow IAT Max",
    "Flow IAT Min",
    "Fwd IAT Tot",
    "Fwd IAT Mean",
    "Fwd IAT Std",
    "Fwd IAT Max",
    "Fwd IAT Min",
    "Bwd IAT Tot",
    "Bwd IAT Mean",
    "Bwd IAT Std",
    "Bwd IAT Max",
    "Bwd IAT Min",
    "Fwd PSH Flags",
    "Bwd PSH Flags",
    "Fwd URG Flags",
    "Bwd URG Flags",
    "Fwd Header Len",
    "Bwd Header Len",
    "Fwd Pkts/s",
    "Bwd Pkts/s",
    "Pkt Len Min",
    "Pkt Len Max",
    "Pkt Len Mean",
    "Pkt Len Std",
    "Pkt Len Var",
    "FIN Flag Cnt",
    "SYN Flag Cnt",
    "RST Flag Cnt",
    "PSH Flag Cnt",
    "ACK Flag Cnt",
    "URG Flag Cnt",
    "CWE Flag Count",
    "ECE Flag Cnt",
    "Down/Up Ratio",
    "Pkt Size Avg",
    "Fwd Seg Size Avg",
    "Bwd Seg Size Avg",
    "Fwd Byts/b Avg",
    "Fwd Pkts/b Avg",
    "Fwd Blk Rate Avg",
    "Bwd Byts/b Avg",
    "Bwd Pkts/b Avg",
    "Bwd Blk Rate Avg",
    "Subflow Fwd Pkts",
    "Subflow Fwd Byts",
    "Subflow Bwd Pkts",
    "Subflow Bwd Byts",
    "Init Fwd Win Byts",
    "Init Bwd Win Byts",
    "Fwd Act Data Pkts",
    "Fwd Seg Size Min",
    "Active Mean",
    "Active Std",
    "Active Max",
    "Active Min",
    "Idle Mean",
    "Idle Std",
    "Idle Max",
    "Idle Min",
    "Label",
];

/// The ordered column-name list of the output format.
pub fn emit_schema() -> &'static [&'static str] {
    &SCHEMA
}

/// The 76 numeric feature columns: everything except the identification
/// columns and Label. This is also the feature set preprocessing scales.
pub fn feature_names() -> &'static [&'static str] {
    &SCHEMA[7..83]
}

/// Index of a feature name within [`feature_names`].
pub fn feature_index(name: &str) -> Option<usize> {
    feature_names().iter().position(|n| *n == name)
}

/// Column types for a flow table in schema order.
pub fn flow_table_schema() -> Vec<(&'static str, DType)> {
    SCHEMA
        .iter()
        .map(|&name| {
            let dtype = match name {
                "Flow ID" | "Src IP" | "Dst IP" | "Label" => DType::Utf8,
                "Src Port" | "Dst Port" | "Protocol" | "Timestamp" => DType::Int64,
                _ => DType::Float64,
            };
            (name, dtype)
        })
        .collect()
}
