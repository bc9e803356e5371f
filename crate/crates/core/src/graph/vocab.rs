use crate::error::GraphError;

/// Ordered atom types with their maximum valences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomVocab {
    symbols: Vec<String>,
    valences: Vec<u32>,
}

impl AtomVocab {
    pub fn new<S: Into<String>>(
        entries: impl IntoIterator<Item = (S, u32)>,
    ) -> Result<Self, GraphError> {
        let (symbols, valences): (Vec<String>, Vec<u32>) =
            entries.into_iter().map(|(s, v)| (s.into(), v)).unzip();
        if symbols.is_empty() {
            return Err(GraphError::Vocab("no atom types".into()));
        }
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(GraphError::Vocab(format!("bad symbol `{s}`")));
            }
            if symbols[..i].contains(s) {
                return Err(GraphError::Vocab(format!("duplicate symbol `{s}`")));
            }
            if valences[i] == 0 {
                return Err(GraphError::Vocab(format!("symbol `{s}` has valence 0")));
            }
        }
        Ok(Self { symbols, valences })
    }

    /// Carbon, nitrogen, oxygen.
    pub fn organic() -> Self {
        Self::new([("C", 4), ("N", 3), ("O", 2)]).expect("static vocab")
    }

    /// A single node type for generic (non-chemical) graphs.
    pub fn generic(max_degree: u32) -> Self {
        Self::new([("V", max_degree.max(1))]).expect("static vocab")
    }

    /// Parses `C:4,N:3,O:2`.
    pub fn parse(spec: &str) -> Result<Self, GraphError> {
        let entries = spec
            .split(',')
            .map(|e| {
                let (s, v) = e.trim().split_once(':').ok_or_else(|| {
                    GraphError::Vocab(format!("expected SYMBOL:VALENCE, got `{e}`"))
                })?;
                let v = v
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| GraphError::Vocab(format!("bad valence in `{e}`")))?;
                Ok((s.trim().to_string(), v))
            })
            .collect::<Result<Vec<_>, GraphError>>()?;
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, t: usize) -> &str {
        &self.symbols[t]
    }

    pub fn valence(&self, t: usize) -> u32 {
        self.valences[t]
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    pub fn to_spec(&self) -> String {
        self.symbols
            .iter()
            .zip(&self.valences)
            .map(|(s, v)| format!("{s}:{v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Bond orders; the category index `len()` is the virtual "no edge" type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BondVocab {
    orders: Vec<u32>,
}

impl BondVocab {
    pub fn new(orders: Vec<u32>) -> Result<Self, GraphError> {
        if orders.is_empty() {
            return Err(GraphError::Vocab("no bond orders".into()));
        }
        if orders[0] == 0 || orders.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GraphError::Vocab(format!(
                "bond orders must be positive and strictly increasing, got {orders:?}"
            )));
        }
        Ok(Self { orders })
    }

    /// Single, double, triple.
    pub fn standard() -> Self {
        Self::new(vec![1, 2, 3]).expect("static vocab")
    }

    pub fn single_only() -> Self {
        Self::new(vec![1]).expect("static vocab")
    }

    pub fn parse(spec: &str) -> Result<Self, GraphError> {
        let orders = spec
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|_| GraphError::Vocab(format!("bad bond order `{t}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(orders)
    }

    /// Number of real bond types `b`.
    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    /// Total edge categories `b + 1`.
    pub fn categories(&self) -> usize {
        self.orders.len() + 1
    }

    pub fn no_edge(&self) -> usize {
        self.orders.len()
    }

    /// Bond order of an edge category (0 for no edge).
    pub fn order(&self, category: usize) -> u32 {
        self.orders.get(category).copied().unwrap_or(0)
    }

    pub fn category_of(&self, order: u32) -> Option<usize> {
        self.orders.iter().position(|&o| o == order)
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    pub fn to_spec(&self) -> String {
        self.orders
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }
}
