use std::fmt;

/// One inequality checked numerically, with its measured slack.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub slack: f64,
    pub passed: bool,
}

impl Check {
    /// `value <= bound`.
    pub fn le(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::from_slack(name, value, bound, bound - value)
    }

    /// `value >= bound`.
    pub fn ge(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::from_slack(name, value, bound, value - bound)
    }

    /// `|value - target| <= tol`.
    pub fn close(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::from_slack(name, value, target, tol - (value - target).abs())
    }

    fn from_slack(name: impl Into<String>, value: f64, bound: f64, slack: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            slack,
            passed: slack >= 0.0,
        }
    }
}

/// Ordered list of checks for one family member or family-level computation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CertificateReport {
    pub label: String,
    pub checks: Vec<Check>,
}

impl CertificateReport {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Smallest slack over all checks.
    pub fn min_slack(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.slack)
            .fold(f64::INFINITY, f64::min)
    }
}

impl fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = if self.label.is_empty() {
            String::new()
        } else {
            format!("{}.", self.label)
        };
        for c in &self.checks {
            writeln!(f, "{prefix}{}.value={}", c.name, c.value)?;
            writeln!(f, "{prefix}{}.bound={}", c.name, c.bound)?;
            writeln!(f, "{prefix}{}.slack={}", c.name, c.slack)?;
            writeln!(f, "{prefix}{}.pass={}", c.name, c.passed)?;
        }
        writeln!(f, "{prefix}all_pass={}", self.all_passed())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_directions() {
        assert!(Check::le("a", 1.0, 2.0).passed);
        assert!(!Check::le("a", 3.0, 2.0).passed);
        assert!(Check::ge("b", 3.0, 2.0).passed);
        assert!(Check::close("c", 1.0 + 1e-12, 1.0, 1e-10).passed);
        assert!(!Check::close("c", 1.1, 1.0, 1e-10).passed);
        let mut r = CertificateReport::new("x");
        r.push(Check::le("a", 1.0, 2.0));
        assert!(r.to_string().contains("x.a.slack=1\n"));
        assert!(r.to_string().ends_with("x.all_pass=true\n"));
    }
}
