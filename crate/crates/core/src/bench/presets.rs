use crate::data::{LabelRule, OodSelector, SplitSpec};

/// Built-in dataset definition: label column, label rule and OoD split.
#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    /// `None` when the label column depends on the dataset export and must be
    /// given in the config.
    pub label_column: Option<&'static str>,
    pub label_rule: LabelRule,
    pub split: SplitSpec,
}

fn split(feature: &str, value: &str) -> SplitSpec {
    SplitSpec { feature: feature.into(), ood: OodSelector::Values(vec![value.into()]), drop_feature: true }
}

pub fn presets() -> Vec<Preset> {
    vec![
        Preset {
            name: "adult",
            label_column: Some("income"),
            label_rule: LabelRule::TwoValued,
            split: split("gender", "Female"),
        },
        Preset {
            name: "video_games",
            label_column: None,
            label_rule: LabelRule::TwoValued,
            split: split("Genre", "Action"),
        },
        Preset {
            name: "heart",
            label_column: Some("cardio"),
            label_rule: LabelRule::TwoValued,
            split: split("gender", "2"),
        },
        Preset { name: "bank", label_column: Some("y"), label_rule: LabelRule::TwoValued, split: split("job", "student") },
        Preset {
            name: "default_credit",
            label_column: Some("default payment next month"),
            label_rule: LabelRule::TwoValued,
            split: split("SEX", "1"),
        },
        Preset {
            name: "covertype",
            label_column: Some("Cover_Type"),
            label_rule: LabelRule::MajorityVsRest,
            split: split("Wilderness_Area1", "1"),
        },
        Preset {
            name: "bng_zoo",
            label_column: Some("type"),
            label_rule: LabelRule::MajorityVsRest,
            split: split("domestic", "True"),
        },
    ]
}

pub fn preset(name: &str) -> Option<Preset> {
    presets().into_iter().find(|p| p.name == name)
}
