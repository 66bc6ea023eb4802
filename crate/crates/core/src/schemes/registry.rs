use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Scheme, SchemeError, SchemeKind};
use crate::bitnum::NumFormat;
use crate::rangemap::RangeMap;

pub const MAP_TAG_SHIFT: u32 = 54;
pub const MAP_TAG_SLOTS: usize = 16;

/// Map Tag carried in physical address bits [57:54].
pub fn map_tag(addr: u64) -> u8 {
    ((addr >> MAP_TAG_SHIFT) & 0xF) as u8
}

/// Places `tag` into bits [57:54] of `addr`.
pub fn with_map_tag(addr: u64, tag: u8) -> u64 {
    (addr & !(0xF << MAP_TAG_SHIFT)) | ((tag as u64 & 0xF) << MAP_TAG_SHIFT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotConfig {
    pub tag: u8,
    pub scheme: SchemeKind,
    pub format: NumFormat,
    /// RangeMap file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rid_bits: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryConfig {
    #[serde(default)]
    pub slot: Vec<SlotConfig>,
}

impl RegistryConfig {
    /// Parses TOML or JSON, chosen by extension (`.json`, anything else TOML).
    pub fn parse(text: &str, json: bool) -> Result<Self, SchemeError> {
        if json {
            serde_json::from_str(text).map_err(|e| SchemeError::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| SchemeError::Config(e.to_string()))
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegisteredSlot {
    pub tag: u8,
    /// `None` for the format-agnostic default at tag 0.
    pub format: Option<NumFormat>,
    pub scheme: Arc<Scheme>,
}

/// Tag-indexed scheme table. Tag 0 is always SEC-DED.
#[derive(Debug, Clone)]
pub struct SchemeRegistry {
    slots: Vec<Option<RegisteredSlot>>,
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl SchemeRegistry {
    pub fn new() -> Self {
        let mut slots = vec![None; MAP_TAG_SLOTS];
        slots[0] = Some(RegisteredSlot {
            tag: 0,
            format: None,
            scheme: Arc::new(Scheme::SecDed(super::SecDedScheme::shared())),
        });
        Self { slots }
    }

    pub fn register(&mut self, tag: u8, format: NumFormat, scheme: Scheme) -> Result<(), SchemeError> {
        if tag == 0 || tag as usize >= MAP_TAG_SLOTS {
            return Err(SchemeError::Config(format!("tag {tag} cannot be registered (valid: 1..=15)")));
        }
        if self.slots[tag as usize].is_some() {
            return Err(SchemeError::Config(format!("tag {tag} registered twice")));
        }
        self.slots[tag as usize] = Some(RegisteredSlot { tag, format: Some(format), scheme: Arc::new(scheme) });
        Ok(())
    }

    /// Builds every slot, loading maps relative to `base_dir`.
    pub fn from_config(config: &RegistryConfig, base_dir: &Path) -> Result<Self, SchemeError> {
        let mut reg = Self::new();
        for slot in &config.slot {
            let map = match &slot.map {
                Some(p) => Some(Arc::new(RangeMap::load(&base_dir.join(p))?)),
                None => None,
            };
            if map.is_some() && !slot.scheme.is_rangeguard() {
                return Err(SchemeError::Config(format!("tag {}: {} takes no range map", slot.tag, slot.scheme)));
            }
            let scheme = Scheme::build(slot.scheme, slot.format, map, slot.rid_bits)?;
            reg.register(slot.tag, slot.format, scheme)?;
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self, SchemeError> {
        let text = std::fs::read_to_string(path)?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let config = RegistryConfig::parse(&text, json)?;
        Self::from_config(&config, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn slot(&self, tag: u8) -> Result<&RegisteredSlot, SchemeError> {
        self.slots
            .get(tag as usize)
            .and_then(Option::as_ref)
            .ok_or(SchemeError::UnregisteredTag(tag))
    }

    pub fn dispatch(&self, addr: u64) -> Result<&RegisteredSlot, SchemeError> {
        self.slot(map_tag(addr))
    }

    pub fn tags(&self) -> impl Iterator<Item = u8> + '_ {
        self.slots.iter().flatten().map(|s| s.tag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rangemap::{build_simple_map, ExponentPmf};

    #[test]
    fn tag_bits() {
        assert_eq!(map_tag(0), 0);
        assert_eq!(map_tag(1 << 54), 1);
        assert_eq!(map_tag(0xF << 54), 15);
        assert_eq!(map_tag(1 << 58 | 1 << 53), 0);
        assert_eq!(map_tag(with_map_tag(0xDEAD_BEEF, 9)), 9);
        assert_eq!(map_tag(with_map_tag(0x1234, 5)), map_tag(with_map_tag(0x9999_1234, 5)));
    }

    #[test]
    fn config_roundtrip_and_dispatch() {
        let dir = std::env::temp_dir().join(format!("rg-registry-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let pmf = ExponentPmf::gaussian(4.0, NumFormat::BF16).unwrap();
        build_simple_map(&pmf, 16).unwrap().save(&dir.join("m.json")).unwrap();
        let toml_text = r#"
            [[slot]]
            tag = 1
            scheme = "rg-ssc8"
            format = "bf16"
            map = "m.json"

            [[slot]]
            tag = 2
            scheme = "baseline"
            format = "bf16"
        "#;
        std::fs::write(dir.join("reg.toml"), toml_text).unwrap();
        let reg = SchemeRegistry::load(&dir.join("reg.toml")).unwrap();
        assert_eq!(reg.tags().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(reg.dispatch(0x1000).unwrap().scheme.kind(), SchemeKind::SecDed);
        assert_eq!(reg.dispatch(1 << 54 | 0x40).unwrap().scheme.kind(), SchemeKind::RgSsc8);
        assert!(matches!(reg.dispatch(3 << 54), Err(SchemeError::UnregisteredTag(3))));

        let cfg = RegistryConfig::parse(toml_text, false).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RegistryConfig::parse(&json, true).unwrap(), cfg);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn rejects_bad_slots() {
        let mut reg = SchemeRegistry::new();
        let s = Scheme::build(SchemeKind::Ssc8, NumFormat::BF16, None, None).unwrap();
        assert!(reg.register(0, NumFormat::BF16, s.clone()).is_err());
        reg.register(4, NumFormat::BF16, s.clone()).unwrap();
        assert!(reg.register(4, NumFormat::BF16, s).is_err());
        assert!(RegistryConfig::parse("[[slot]]\ntag = 1\nscheme = \"vapi\"\nformat = \"bf16\"\n", false).is_err());
    }
}
