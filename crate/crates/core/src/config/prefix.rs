use std::fmt;
use std::str::FromStr;

/// An IPv4 prefix with host bits cleared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prefix {
    addr: u32,
    len: u8,
}

impl Prefix {
    pub fn new(addr: u32, len: u8) -> Option<Self> {
        if len > 32 || addr & !Self::mask(len) != 0 {
            return None;
        }
        Some(Prefix { addr, len })
    }

    fn mask(len: u8) -> u32 {
        if len == 0 {
            0
        } else {
            u32::MAX << (32 - len)
        }
    }

    pub fn addr(self) -> u32 {
        self.addr
    }

    pub fn len(self) -> u8 {
        self.len
    }

    /// True when every address of `other` lies inside `self`.
    pub fn contains(self, other: Prefix) -> bool {
        other.len >= self.len && other.addr & Self::mask(self.len) == self.addr
    }

    /// The two halves of this prefix, or `None` for a /32.
    pub fn halves(self) -> Option<(Prefix, Prefix)> {
        if self.len == 32 {
            return None;
        }
        let len = self.len + 1;
        let hi = self.addr | (1u32 << (32 - len));
        Some((Prefix { addr: self.addr, len }, Prefix { addr: hi, len }))
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.addr.to_be_bytes();
        write!(f, "{a}.{b}.{c}.{d}/{}", self.len)
    }
}

impl FromStr for Prefix {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (ip, len) = s
            .split_once('/')
            .ok_or_else(|| format!("prefix `{s}` lacks a length"))?;
        let len: u8 = len
            .parse()
            .map_err(|_| format!("bad prefix length in `{s}`"))?;
        let octets: Vec<&str> = ip.split('.').collect();
        if octets.len() != 4 {
            return Err(format!("bad address in `{s}`"));
        }
        let mut addr = 0u32;
        for o in octets {
            let v: u8 = o.parse().map_err(|_| format!("bad octet in `{s}`"))?;
            addr = (addr << 8) | v as u32;
        }
        Prefix::new(addr, len).ok_or_else(|| format!("`{s}` has host bits set or length > 32"))
    }
}

/// A BGP community `N:M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Community(pub u32);

impl Community {
    pub fn new(asn: u16, value: u16) -> Self {
        Community(((asn as u32) << 16) | value as u32)
    }
}

impl fmt::Display for Community {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.0 >> 16, self.0 & 0xffff)
    }
}

impl FromStr for Community {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("community `{s}` is not N:M"))?;
        let a: u16 = a.parse().map_err(|_| format!("bad community `{s}`"))?;
        let b: u16 = b.parse().map_err(|_| format!("bad community `{s}`"))?;
        Ok(Community::new(a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_round_trip_and_containment() {
        let p: Prefix = "10.0.0.0/16".parse().unwrap();
        let q: Prefix = "10.0.1.0/24".parse().unwrap();
        assert_eq!(p.to_string(), "10.0.0.0/16");
        assert!(p.contains(q));
        assert!(!q.contains(p));
        assert!("10.0.0.1/24".parse::<Prefix>().is_err());
        let (lo, hi) = q.halves().unwrap();
        assert_eq!(lo.to_string(), "10.0.1.0/25");
        assert_eq!(hi.to_string(), "10.0.1.128/25");
    }

    #[test]
    fn community_round_trip() {
        let c: Community = "65001:2".parse().unwrap();
        assert_eq!(c.to_string(), "65001:2");
        assert!("65001".parse::<Community>().is_err());
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl serde::Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> serde::Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Prefix);
string_serde!(Community);
