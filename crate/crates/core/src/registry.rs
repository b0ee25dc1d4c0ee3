//! Name-keyed registries of interchangeable algorithms.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Anything that can be stored in a [`Registry`].
pub trait Named {
    fn name(&self) -> &'static str;
}

/// A set of trait objects addressable by their [`Named::name`].
pub struct Registry<T: ?Sized + Named> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Box<T>>,
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Insert `item`, replacing any earlier entry of the same name.
    pub fn register(&mut self, item: Box<T>) -> &mut Self {
        self.entries.insert(item.name(), item);
        self
    }

    pub fn with(mut self, item: Box<T>) -> Self {
        self.register(item);
        self
    }

    pub fn get(&self, name: &str) -> Result<&T> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::Unknown {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    /// Registered names in sorted order.
    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.entries.values().map(|b| b.as_ref())
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter: Named {
        fn greet(&self) -> String;
    }

    struct Hello;
    impl Named for Hello {
        fn name(&self) -> &'static str {
            "hello"
        }
    }
    impl Greeter for Hello {
        fn greet(&self) -> String {
            "hello".into()
        }
    }

    #[test]
    fn lookup_and_unknown() {
        let reg: Registry<dyn Greeter> = Registry::new("greeter").with(Box::new(Hello));
        assert_eq!(reg.get("hello").unwrap().greet(), "hello");
        let err = reg.get("bye").err().unwrap().to_string();
        assert!(err.contains("unknown greeter 'bye'"), "{err}");
        assert!(err.contains("hello"));
        assert_eq!(reg.names(), vec!["hello"]);
    }
}
