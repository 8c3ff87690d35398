use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::DomainError;

/// Checks the shared identifier grammar: non-empty, no whitespace, no control characters.
pub fn check_identifier(raw: &str) -> Result<(), DomainError> {
    if raw.is_empty() {
        return Err(DomainError::InvalidId("identifier must not be empty".into()));
    }
    if let Some(ch) = raw.chars().find(|c| c.is_whitespace() || c.is_control()) {
        return Err(DomainError::InvalidId(format!("identifier `{}` contains {ch:?}", raw.escape_debug())));
    }
    Ok(())
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(raw: impl Into<String>) -> Result<Self, DomainError> {
                let raw = raw.into();
                check_identifier(&raw)?;
                Ok(Self(raw))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }

            pub fn is_valid(&self) -> bool {
                check_identifier(&self.0).is_ok()
            }
        }

        /// Unchecked conversion; encoding rejects invalid identifiers.
        impl From<&str> for $name {
            fn from(raw: &str) -> Self {
                Self(raw.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(raw: String) -> Self {
                Self(raw)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                check_identifier(&self.0).map_err(serde::ser::Error::custom)?;
                serializer.serialize_str(&self.0)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(deserializer)?;
                Self::new(raw).map_err(serde::de::Error::custom)
            }
        }
    };
}

string_id!(
    /// Community member identifier; never reused after exit.
    MemberId
);
string_id!(RoleId);
string_id!(RuleId);
string_id!(ProposalId);
string_id!(PetitionId);
string_id!(BlocId);
string_id!(
    /// Delegation topic; `*` matches every topic.
    TopicId
);
string_id!(TriggerId);

impl TopicId {
    pub fn wildcard() -> Self {
        TopicId("*".into())
    }

    pub fn is_wildcard(&self) -> bool {
        self.0 == "*"
    }
}

impl Default for TopicId {
    fn default() -> Self {
        Self::wildcard()
    }
}

/// Who performed an event: a member, or the engine itself.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Actor {
    System,
    Member(MemberId),
}

impl Actor {
    pub fn member(&self) -> Option<&MemberId> {
        match self {
            Actor::Member(m) => Some(m),
            Actor::System => None,
        }
    }

    pub fn is_system(&self) -> bool {
        matches!(self, Actor::System)
    }
}

impl From<MemberId> for Actor {
    fn from(m: MemberId) -> Self {
        Actor::Member(m)
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Actor::System => f.write_str("system"),
            Actor::Member(m) => write!(f, "member:{m}"),
        }
    }
}

impl std::str::FromStr for Actor {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "system" {
            return Ok(Actor::System);
        }
        let id = s.strip_prefix("member:").unwrap_or(s);
        Ok(Actor::Member(MemberId::new(id)?))
    }
}

impl Serialize for Actor {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if let Actor::Member(m) = self {
            check_identifier(m.as_str()).map_err(serde::ser::Error::custom)?;
        }
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Actor {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        if raw != "system" && !raw.starts_with("member:") {
            return Err(serde::de::Error::custom(format!("bad actor `{raw}`")));
        }
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// A 32-byte SHA-256 digest, rendered as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, DomainError> {
        if s.len() != 64 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(DomainError::InvalidDigest(s.to_owned()));
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(|_| DomainError::InvalidDigest(s.to_owned()))?;
        Ok(Digest(out))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Digest::from_hex(&raw).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifier_grammar() {
        assert!(MemberId::new("alice").is_ok());
        assert!(MemberId::new("").is_err());
        assert!(MemberId::new("a b").is_err());
        assert!(MemberId::new("a\u{7}").is_err());
    }

    #[test]
    fn actor_text_form() {
        assert_eq!(Actor::System.to_string(), "system");
        let a: Actor = "member:bob".parse().unwrap();
        assert_eq!(a, Actor::Member("bob".into()));
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, "\"member:bob\"");
        assert!(serde_json::from_str::<Actor>("\"bob\"").is_err());
    }

    #[test]
    fn digest_hex_is_lowercase_only() {
        let d = Digest([0xab; 32]);
        assert_eq!(Digest::from_hex(&d.to_hex()).unwrap(), d);
        assert!(Digest::from_hex(&d.to_hex().to_uppercase()).is_err());
        assert!(Digest::from_hex("00").is_err());
    }
}
