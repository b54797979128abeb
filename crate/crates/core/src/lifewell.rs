//! The shipped 27-item LifeWell questionnaire and its default sentence
//! mapping.

use crate::tabular::Schema;
use crate::textgen::MappingTable;

const SCHEMA_TOML: &str = include_str!("../assets/lifewell_schema.toml");
const MAPPING_TOML: &str = include_str!("../assets/lifewell_mapping.toml");

pub const N_ITEMS: usize = 27;

pub fn schema() -> Schema {
    Schema::from_toml_str(SCHEMA_TOML).expect("bundled LifeWell schema is valid")
}

pub fn schema_toml() -> &'static str {
    SCHEMA_TOML
}

pub fn mapping() -> MappingTable {
    MappingTable::from_toml_str(MAPPING_TOML).expect("bundled LifeWell mapping is valid")
}

pub fn mapping_toml() -> &'static str {
    MAPPING_TOML
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::ItemGroup;

    #[test]
    fn twenty_seven_items_in_five_groups() {
        let s = schema();
        assert_eq!(s.features().count(), N_ITEMS);
        let count = |g| s.features().filter(|c| c.group == Some(g)).count();
        assert_eq!(count(ItemGroup::Physical), 6);
        assert_eq!(count(ItemGroup::Mental), 9);
        assert_eq!(count(ItemGroup::Economic), 5);
        assert_eq!(count(ItemGroup::Social), 5);
        assert_eq!(count(ItemGroup::Cultural), 2);
        assert_eq!(
            s.column("A2").unwrap().prompt,
            "How would you rate your health generally?"
        );
    }
}
