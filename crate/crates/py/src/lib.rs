//! Python bindings for the net class-rewriting engine.
//!
//! Exposes the main types and operations: nets (parse, serialize,
//! validate, isomorphism, enclosure), rule systems (parse, apply,
//! universally-partitioning diagnostics), block-cover decompositions with
//! reconstruction, the confluence verdict pipeline, the brute-force
//! joinability oracle and the minimum-connector bound.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use netrw_core::budget::Budget;
use netrw_core::confluence::{
    check_confluence, connector_set, ConfluenceContext, DimensionFamily,
};
use netrw_core::format::{parse_file, serialize_net, serialize_system};
use netrw_core::jungle::{canonical_key, is_isomorphic, Jungle};
use netrw_core::matching::{enclose, match_net};
use netrw_core::net::Net;
use netrw_core::nuo::{nuo_decompose_sets, nuo_inverse, NuoRepresentation};
use netrw_core::oracle::{derivation_space, joinable};
use netrw_core::rns::{apply_rns, validate_uprns, RuleSystem};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn budget_from(candidates: usize) -> Budget {
    Budget::new(64, 8, candidates)
}

/// A finite net of ranked-letter nodes with ordered ports.
#[pyclass(name = "Net", from_py_object)]
#[derive(Clone)]
struct PyNet {
    inner: Net,
    name: String,
}

#[pymethods]
impl PyNet {
    /// Parses the first net block of the given text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let parsed = parse_file(text).map_err(value_error)?;
        let (name, net) = parsed
            .nets
            .first()
            .cloned()
            .ok_or_else(|| value_error("text contains no net block"))?;
        Ok(PyNet { inner: net, name })
    }

    fn serialize(&self) -> String {
        serialize_net(&self.name, &self.inner)
    }

    /// Invariant violations; an empty list means the net is valid.
    fn validate(&self) -> Vec<String> {
        self.inner.validate().iter().map(|v| v.to_string()).collect()
    }

    #[getter]
    fn name(&self) -> String {
        self.name.clone()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn link_count(&self) -> usize {
        self.inner.links().len()
    }

    fn node_ids(&self) -> Vec<u32> {
        self.inner.node_ids().into_iter().collect()
    }

    fn is_isomorphic(&self, other: &PyNet) -> bool {
        is_isomorphic(&self.inner, &other.inner)
    }

    fn canonical_key(&self) -> String {
        canonical_key(&self.inner)
    }

    /// Connected induced sub-nets, up to isomorphism.
    #[pyo3(signature = (budget=4096))]
    fn enclose(&self, budget: usize) -> PyResult<Vec<PyNet>> {
        let jungle = enclose(&self.inner, &budget_from(budget)).map_err(value_error)?;
        Ok(jungle
            .iter()
            .enumerate()
            .map(|(i, net)| PyNet {
                inner: net.clone(),
                name: format!("{}_enc_{}", self.name, i),
            })
            .collect())
    }

    /// Decomposes the net along a cover of node-id sets.
    #[pyo3(signature = (cover, context_choice=0))]
    fn decompose(&self, cover: Vec<Vec<u32>>, context_choice: usize) -> PyResult<PyNuoRep> {
        let sets: Vec<std::collections::BTreeSet<u32>> =
            cover.into_iter().map(|c| c.into_iter().collect()).collect();
        let rep =
            nuo_decompose_sets(&self.inner, &sets, context_choice).map_err(value_error)?;
        Ok(PyNuoRep { inner: rep })
    }

    fn __repr__(&self) -> String {
        format!(
            "Net(name={:?}, nodes={}, links={})",
            self.name,
            self.inner.node_count(),
            self.inner.links().len()
        )
    }
}

/// A block-cover decomposition of a net.
#[pyclass(name = "NuoRepresentation")]
struct PyNuoRep {
    inner: NuoRepresentation,
}

#[pymethods]
impl PyNuoRep {
    #[getter]
    fn block_count(&self) -> usize {
        self.inner.block_count()
    }

    /// (block index, context node id) pairs for shared nodes.
    #[getter]
    fn overlap(&self) -> Vec<(usize, u32)> {
        self.inner
            .overlap
            .iter()
            .map(|(r, n)| (r.index, *n))
            .collect()
    }

    /// Glues the representation back into a net.
    fn inverse(&self) -> PyResult<PyNet> {
        let net = nuo_inverse(&self.inner).map_err(value_error)?;
        Ok(PyNet {
            inner: net,
            name: "reconstructed".into(),
        })
    }
}

/// A set of rewrite rules.
#[pyclass(name = "RuleSystem", from_py_object)]
#[derive(Clone)]
struct PyRuleSystem {
    inner: RuleSystem,
    uprns_ground: Option<String>,
}

#[pymethods]
impl PyRuleSystem {
    /// Parses the first system of the text, or bundles its free-standing
    /// rules into one.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let parsed = parse_file(text).map_err(value_error)?;
        if let Some(first) = parsed.systems.first() {
            return Ok(PyRuleSystem {
                inner: first.system.clone(),
                uprns_ground: first.uprns_ground.clone(),
            });
        }
        if parsed.rules.is_empty() {
            return Err(value_error("text contains no rules"));
        }
        Ok(PyRuleSystem {
            inner: RuleSystem::new("parsed", parsed.rules),
            uprns_ground: None,
        })
    }

    #[getter]
    fn rule_names(&self) -> Vec<String> {
        self.inner.rules.iter().map(|r| r.name.clone()).collect()
    }

    #[getter]
    fn instance_sensitive(&self) -> bool {
        self.inner.flags.instance_sensitive
    }

    fn serialize(&self) -> String {
        serialize_system(&self.inner, self.uprns_ground.as_deref())
    }

    /// One rewrite step over the given nets; the union of all
    /// single-occurrence replacements up to isomorphism.
    #[pyo3(signature = (nets, budget=4096))]
    fn apply(&self, nets: Vec<PyNet>, budget: usize) -> PyResult<Vec<PyNet>> {
        let jungle = Jungle::from_nets(nets.into_iter().map(|n| n.inner));
        let result =
            apply_rns(&self.inner, &jungle, &budget_from(budget)).map_err(value_error)?;
        Ok(result
            .iter()
            .enumerate()
            .map(|(i, net)| PyNet {
                inner: net.clone(),
                name: format!("result_{i}"),
            })
            .collect())
    }

    /// Universally-partitioning diagnostics against a ground net; an empty
    /// list means every condition holds.
    fn uprns_diagnostics(&self, ground: &PyNet) -> Vec<String> {
        validate_uprns(&self.inner, &ground.inner, &budget_from(4096))
            .iter()
            .map(|v| v.to_string())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "RuleSystem(name={:?}, rules={})",
            self.inner.name,
            self.inner.rules.len()
        )
    }
}

/// Number of embeddings of `pattern` into `target`.
#[pyfunction]
#[pyo3(signature = (pattern, target, budget=4096))]
fn embedding_count(pattern: &PyNet, target: &PyNet, budget: usize) -> PyResult<usize> {
    Ok(match_net(&pattern.inner, &target.inner, &budget_from(budget))
        .map_err(value_error)?
        .len())
}

/// Minimum number of comprehensive connector pairs needed to harmonize a
/// rule set of the given size.
#[pyfunction]
fn min_connector_bound(n: usize) -> PyResult<usize> {
    if n == 0 {
        return Err(value_error("rule set must be nonempty"));
    }
    Ok(netrw_core::confluence::min_connector_bound(n))
}

/// Confluence verdict for a rule pair over a ground net. Dimension jungles
/// are given as lists of nets per family; connectors are enumerated from
/// the two systems' rules. Returns (kind, direction, connector_count).
#[pyfunction]
#[pyo3(signature = (ground, ra, rb, dims_a, dims_b, strict_parens=false, budget=4096))]
fn confluence_verdict(
    ground: &PyNet,
    ra: &PyRuleSystem,
    rb: &PyRuleSystem,
    dims_a: Vec<PyNet>,
    dims_b: Vec<PyNet>,
    strict_parens: bool,
    budget: usize,
) -> PyResult<(String, String, usize)> {
    let family = |nets: Vec<PyNet>, name: &str| DimensionFamily {
        dimensions: vec![(
            name.to_string(),
            Jungle::from_nets(nets.into_iter().map(|n| n.inner)),
        )],
        grades: Vec::new(),
    };
    let ctx = ConfluenceContext {
        dims_a: family(dims_a, "first"),
        dims_b: family(dims_b, "second"),
        strict_parens,
        budget: budget_from(budget),
    };
    let r_a = ra
        .inner
        .rules
        .first()
        .ok_or_else(|| value_error("first system has no rules"))?;
    let r_b = rb
        .inner
        .rules
        .first()
        .ok_or_else(|| value_error("second system has no rules"))?;
    let conn = connector_set(
        r_a,
        r_b,
        &ra.inner.rules,
        &rb.inner.rules,
        &ground.inner,
        &ctx,
    )
    .map_err(value_error)?;
    let verdict =
        check_confluence(&ground.inner, r_a, r_b, &conn, &ctx).map_err(value_error)?;
    Ok((
        verdict.kind.to_string(),
        verdict
            .direction
            .map(|d| d.to_string())
            .unwrap_or_else(|| "-".to_string()),
        conn.len(),
    ))
}

/// Brute-force joinability: returns (joinable_at, relation).
#[pyfunction]
#[pyo3(signature = (ground, ra, rb, completions, depth=4, budget=4096))]
fn joinable_relation(
    ground: &PyNet,
    ra: &PyRuleSystem,
    rb: &PyRuleSystem,
    completions: &PyRuleSystem,
    depth: usize,
    budget: usize,
) -> PyResult<(Option<usize>, String)> {
    let r_a = ra
        .inner
        .rules
        .first()
        .ok_or_else(|| value_error("first system has no rules"))?;
    let r_b = rb
        .inner
        .rules
        .first()
        .ok_or_else(|| value_error("second system has no rules"))?;
    let verdict = joinable(
        &ground.inner,
        r_a,
        r_b,
        &completions.inner.rules,
        depth,
        &budget_from(budget),
    )
    .map_err(value_error)?;
    Ok((verdict.joinable_at, verdict.relation.to_string()))
}

/// Breadth-first derivation-space summary: (vertices, edges, truncated).
#[pyfunction]
#[pyo3(signature = (ground, rules, depth=4, cap=4096, budget=4096))]
fn derivation_summary(
    ground: &PyNet,
    rules: &PyRuleSystem,
    depth: usize,
    cap: usize,
    budget: usize,
) -> PyResult<(usize, usize, bool)> {
    let space = derivation_space(
        &ground.inner,
        &rules.inner.rules,
        depth,
        cap,
        &budget_from(budget),
    )
    .map_err(value_error)?;
    Ok((space.vertices.len(), space.edges.len(), space.truncated))
}

#[pymodule]
fn netrw_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNet>()?;
    m.add_class::<PyNuoRep>()?;
    m.add_class::<PyRuleSystem>()?;
    m.add_function(wrap_pyfunction!(embedding_count, m)?)?;
    m.add_function(wrap_pyfunction!(min_connector_bound, m)?)?;
    m.add_function(wrap_pyfunction!(confluence_verdict, m)?)?;
    m.add_function(wrap_pyfunction!(joinable_relation, m)?)?;
    m.add_function(wrap_pyfunction!(derivation_summary, m)?)?;
    Ok(())
}
