use super::{ClassId, KnowledgeBase};

/// Per-KB numbers the refinement operator draws on.
#[derive(Debug, Clone, PartialEq)]
pub struct KbStatistics {
    /// Maximum out-degree per role (0 when the role has no assertions).
    pub max_fillers: Vec<u32>,
    /// Sorted, distinct asserted values per numeric role.
    pub numeric_boundaries: Vec<Vec<f64>>,
    /// Sorted, distinct asserted value indexes per string role.
    pub string_domains: Vec<Vec<u32>>,
    pub top_level_classes: Vec<ClassId>,
    pub leaf_classes: Vec<ClassId>,
    /// Direct subclasses / superclasses per class, ascending.
    pub subclasses: Vec<Vec<ClassId>>,
    pub superclasses: Vec<Vec<ClassId>>,
    /// Direct subroles per role, ascending.
    pub subroles: Vec<Vec<u32>>,
}

pub fn compute_statistics(kb: &KnowledgeBase) -> KbStatistics {
    let max_fillers = (0..kb.num_roles() as u32)
        .map(|r| kb.adjacency(r, false).max_degree() as u32)
        .collect();

    let numeric_boundaries = (0..kb.num_numeric_roles() as u32)
        .map(|d| {
            let mut vals: Vec<f64> = kb.numeric_assertions(d).iter().map(|&(_, v)| v).collect();
            vals.sort_unstable_by(f64::total_cmp);
            // -0.0 and 0.0 compare equal; keep one so the list is strictly ascending.
            vals.dedup_by(|a, b| a == b);
            vals
        })
        .collect();

    let string_domains = (0..kb.num_string_roles() as u32)
        .map(|sr| {
            let mut vals: Vec<u32> = kb.string_assertions(sr).iter().map(|&(_, v)| v).collect();
            vals.sort_unstable();
            vals.dedup();
            vals
        })
        .collect();

    let n = kb.num_classes();
    let mut subclasses = vec![Vec::new(); n];
    let mut superclasses = vec![Vec::new(); n];
    for &(sub, sup) in kb.subclass_edges() {
        subclasses[sup as usize].push(sub);
        superclasses[sub as usize].push(sup);
    }
    let mut subroles = vec![Vec::new(); kb.num_roles()];
    for &(sub, sup) in kb.subrole_edges() {
        subroles[sup as usize].push(sub);
    }
    for v in subclasses.iter_mut().chain(&mut superclasses).chain(&mut subroles) {
        v.sort_unstable();
        v.dedup();
    }

    let top_level_classes = (0..n as u32)
        .filter(|&c| superclasses[c as usize].is_empty())
        .collect();
    let leaf_classes = (0..n as u32)
        .filter(|&c| subclasses[c as usize].is_empty())
        .collect();

    KbStatistics {
        max_fillers,
        numeric_boundaries,
        string_domains,
        top_level_classes,
        leaf_classes,
        subclasses,
        superclasses,
        subroles,
    }
}
