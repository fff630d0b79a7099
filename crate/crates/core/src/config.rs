//! Runtime configuration.
//!
//! Every knob lives in [`RunConfig`], loadable from a TOML file whose keys
//! mirror the field names here; the CLI merges flags on top. Defaults are
//! the calibrated production values, so an empty config is a valid one.

use serde::{Deserialize, Serialize};

use crate::aggregate::{Verdict, WeightVector};
use crate::agents::{Agent, Severity};
use crate::{Error, Result, Score};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Agents enabled for verification.
    pub agents: Vec<Agent>,
    pub weights: WeightVector,
    pub thresholds: Thresholds,
    pub penalties: Penalties,
    pub escalation: Escalation,
    pub decision_mode: DecisionMode,
    /// Verdicts counted as "flagged" when mapping to binary predictions.
    pub positive_verdicts: Vec<Verdict>,
    pub bootstrap_iterations: u32,
    pub rng_seed: u64,
    /// Acceptable false-positive budget, reported alongside eval metrics.
    pub fpr_budget: Score,
    /// Budget per agent; a slower agent is replaced by an empty report and
    /// the sample is marked degraded.
    pub agent_timeout_ms: f64,
    /// Concurrent agent fan-out (disable to force sequential execution).
    pub parallel: bool,
    pub format: OutputFormat,
    /// File-level worker count for batch commands; defaults to the number
    /// of available cores.
    pub jobs: Option<usize>,
    pub security: SecurityRulesConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            agents: Agent::ALL.to_vec(),
            weights: WeightVector::default(),
            thresholds: Thresholds::default(),
            penalties: Penalties::default(),
            escalation: Escalation::default(),
            decision_mode: DecisionMode::BranchOrder,
            positive_verdicts: vec![Verdict::Fail, Verdict::Error],
            bootstrap_iterations: 1000,
            rng_seed: 42,
            fpr_budget: 0.5,
            agent_timeout_ms: 5000.0,
            parallel: true,
            format: OutputFormat::Json,
            jobs: None,
            security: SecurityRulesConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parse a TOML config; omitted keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }
}

/// Detection thresholds. The loop-depth limits are the only ones relaxed
/// in patch mode (multiplied by `patch_multiplier`, rounded up).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Cyclomatic complexity above this is a HIGH correctness issue.
    pub complexity: u32,
    /// Nesting depth above this is a MEDIUM correctness issue.
    pub nesting: u32,
    /// Minimum fraction of risky functions with exception handling.
    pub exception_coverage: Score,
    /// Entropy (bits) above which a long literal is a candidate secret.
    pub entropy: Score,
    /// Minimum literal length for entropy screening.
    pub secret_min_length: usize,
    pub halstead_volume: Score,
    pub patch_multiplier: Score,
    /// Loop depth at which a MEDIUM complexity-class issue fires.
    pub loop_depth_medium: u32,
    /// Loop depth at which the issue escalates to HIGH.
    pub loop_depth_high: u32,
    /// Self-call count treated as exponential recursion (not patch-scaled;
    /// two self-calls are exponential no matter how short the sample).
    pub exponential_self_calls: u32,
    pub docstring_coverage: Score,
    pub comment_density: Score,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            complexity: 15,
            nesting: 4,
            exception_coverage: 0.80,
            entropy: 3.5,
            secret_min_length: 20,
            halstead_volume: 1000.0,
            patch_multiplier: 1.5,
            loop_depth_medium: 2,
            loop_depth_high: 3,
            exponential_self_calls: 2,
            docstring_coverage: 0.5,
            comment_density: 0.05,
        }
    }
}

impl Thresholds {
    /// Patch-mode relaxation: integer threshold times the multiplier,
    /// rounded up so thresholds stay integers.
    pub fn patch_scaled(&self, threshold: u32, mode: crate::facts::Mode) -> u32 {
        match mode {
            crate::facts::Mode::Full => threshold,
            crate::facts::Mode::Patch => {
                (threshold as Score * self.patch_multiplier).ceil() as u32
            }
        }
    }
}

/// Score penalties per severity.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Penalties {
    pub critical: Score,
    pub high: Score,
    pub medium: Score,
    pub low: Score,
}

impl Default for Penalties {
    fn default() -> Self {
        Penalties {
            critical: 0.50,
            high: 0.25,
            medium: 0.10,
            low: 0.02,
        }
    }
}

impl Penalties {
    pub fn penalty(&self, severity: Severity) -> Score {
        match severity {
            Severity::Critical => self.critical,
            Severity::High => self.high,
            Severity::Medium => self.medium,
            Severity::Low => self.low,
        }
    }
}

/// Contextual escalation of injection findings near authentication code.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Escalation {
    /// Window in lines around the finding searched for auth keywords.
    pub window_lines: u32,
    /// Confidence multiplier applied on escalation, clamped to 1.0.
    pub confidence_multiplier: Score,
}

impl Default for Escalation {
    fn default() -> Self {
        Escalation {
            window_lines: 3,
            confidence_multiplier: 2.5,
        }
    }
}

/// How the verdict branches are ordered.
///
/// `BranchOrder` follows the decision procedure literally, which makes the
/// WARNING band `[0.50, 0.85]` take precedence over the clean-pass branch.
/// `Prose` gives the clean-pass rule (score >= 0.70 and no HIGH issues)
/// precedence over the band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionMode {
    BranchOrder,
    Prose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Text,
}

/// The security rule set: structural vulnerability patterns plus secret
/// token regexes. Defaults are built in; a config file may replace either
/// list wholesale.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SecurityRulesConfig {
    pub patterns: Vec<PatternSpec>,
    pub secret_rules: Vec<SecretRuleSpec>,
}

impl Default for SecurityRulesConfig {
    fn default() -> Self {
        SecurityRulesConfig {
            patterns: default_patterns(),
            secret_rules: default_secret_rules(),
        }
    }
}

/// One structural vulnerability pattern with its CWE and base severity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatternSpec {
    pub id: String,
    pub cwe: String,
    pub severity: Severity,
    pub message: String,
    pub rule: PatternRule,
}

/// The structural match a pattern performs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatternRule {
    /// A call whose callee matches one of `callees`. With `full_path` the
    /// whole dotted callee text must match; otherwise the base name is
    /// compared. `argument_regex` further restricts the argument text and
    /// `exempt_argument_regex` suppresses the match (safe-usage escape).
    Call {
        callees: Vec<String>,
        #[serde(default)]
        full_path: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        argument_regex: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exempt_argument_regex: Option<String>,
    },
    /// An assignment whose target matches `target_regex` and whose value
    /// text matches `value_regex`.
    Assignment {
        target_regex: String,
        value_regex: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecretRuleSpec {
    pub id: String,
    pub pattern: String,
}

/// String-interpolation markers inside a call argument: percent formatting
/// against a literal, an f-string with a placeholder, `.format(`, or
/// quote-adjacent concatenation.
const SQL_INTERPOLATION: &str =
    r#"(?s)["']\s*%[\s(]|f"[^"]*\{|f'[^']*\{|\.format\(|["']\s*\+|\+\s*["']"#;

#[allow(clippy::too_many_arguments)]
fn call_pattern(
    id: &str,
    cwe: &str,
    severity: Severity,
    message: &str,
    callees: &[&str],
    full_path: bool,
    argument_regex: Option<&str>,
    exempt_argument_regex: Option<&str>,
) -> PatternSpec {
    PatternSpec {
        id: id.to_string(),
        cwe: cwe.to_string(),
        severity,
        message: message.to_string(),
        rule: PatternRule::Call {
            callees: callees.iter().map(|s| s.to_string()).collect(),
            full_path,
            argument_regex: argument_regex.map(str::to_string),
            exempt_argument_regex: exempt_argument_regex.map(str::to_string),
        },
    }
}

/// Built-in vulnerability pattern library.
pub fn default_patterns() -> Vec<PatternSpec> {
    vec![
        call_pattern(
            "sql-injection",
            "CWE-89",
            Severity::High,
            "SQL query built by string interpolation; use parameterized queries",
            &["execute", "executemany", "executescript"],
            false,
            Some(SQL_INTERPOLATION),
            None,
        ),
        call_pattern(
            "command-injection",
            "CWE-78",
            Severity::High,
            "shell command execution; validate input or avoid the shell",
            &["os.system", "os.popen", "commands.getoutput"],
            true,
            None,
            None,
        ),
        call_pattern(
            "command-injection",
            "CWE-78",
            Severity::High,
            "subprocess invoked with shell=True",
            &[
                "subprocess.call",
                "subprocess.run",
                "subprocess.Popen",
                "subprocess.check_output",
                "subprocess.check_call",
            ],
            true,
            Some(r"shell\s*=\s*True"),
            None,
        ),
        call_pattern(
            "code-execution",
            "CWE-94",
            Severity::Critical,
            "dynamic code evaluation",
            &["eval", "exec"],
            false,
            None,
            None,
        ),
        call_pattern(
            "unsafe-deserialization",
            "CWE-502",
            Severity::High,
            "deserialization of untrusted data",
            &[
                "pickle.load",
                "pickle.loads",
                "cPickle.load",
                "cPickle.loads",
                "marshal.load",
                "marshal.loads",
                "dill.loads",
            ],
            true,
            None,
            None,
        ),
        call_pattern(
            "unsafe-deserialization",
            "CWE-502",
            Severity::High,
            "yaml.load without a safe loader",
            &["yaml.load"],
            true,
            None,
            Some(r"(?i)safeloader|safe_load"),
        ),
        call_pattern(
            "weak-hash",
            "CWE-327",
            Severity::Medium,
            "weak cryptographic hash",
            &["hashlib.md5", "hashlib.sha1", "md5.new", "sha.new"],
            true,
            None,
            None,
        ),
        call_pattern(
            "weak-hash",
            "CWE-327",
            Severity::Medium,
            "weak cryptographic hash",
            &["hashlib.new"],
            true,
            Some(r#"(?i)["'](md5|sha1)["']"#),
            None,
        ),
        call_pattern(
            "weak-prng",
            "CWE-338",
            Severity::Medium,
            "non-cryptographic PRNG in a security context",
            &[
                "random.random",
                "random.randint",
                "random.randrange",
                "random.choice",
                "random.choices",
                "random.uniform",
                "random.getrandbits",
                "random.shuffle",
                "random.sample",
            ],
            true,
            None,
            None,
        ),
        PatternSpec {
            id: "hardcoded-credential".to_string(),
            cwe: "CWE-798".to_string(),
            severity: Severity::High,
            message: "credential assigned from a string literal".to_string(),
            rule: PatternRule::Assignment {
                target_regex: r"(?i)(^|\.)(password|passwd|pwd|secret|secret_key|api_key|apikey|token|auth_token|access_token|access_key|private_key|credential|credentials)$"
                    .to_string(),
                value_regex: r#"^["'][^"']{4,}["']$"#.to_string(),
            },
        },
    ]
}

/// The eleven secret-token regexes, applied to string literals.
pub fn default_secret_rules() -> Vec<SecretRuleSpec> {
    let rules: [(&str, &str); 11] = [
        ("aws-access-key", r"AKIA[0-9A-Z]{16}"),
        ("aws-secret-key", r"(?i)aws.{0,20}[0-9A-Za-z/+=]{40}"),
        ("github-token", r"ghp_[0-9A-Za-z]{36}"),
        ("github-fine-grained-token", r"github_pat_[0-9A-Za-z_]{82}"),
        (
            "generic-api-key",
            r#"(?i)api[_-]?key\s*[=:]\s*["']?[0-9A-Za-z_\-]{16,}"#,
        ),
        (
            "generic-secret",
            r#"(?i)secret\s*[=:]\s*["']?[0-9A-Za-z_\-]{16,}"#,
        ),
        ("bearer-token", r"(?i)bearer\s+[0-9A-Za-z\-._~+/]{20,}"),
        (
            "private-key-pem",
            r"-----BEGIN (RSA |EC |DSA |OPENSSH )?PRIVATE KEY-----",
        ),
        ("slack-token", r"xox[baprs]-[0-9A-Za-z\-]{10,}"),
        (
            "jwt",
            r"eyJ[0-9A-Za-z_\-]{8,}\.[0-9A-Za-z_\-]{8,}\.[0-9A-Za-z_\-]{8,}",
        ),
        (
            "connection-string-credential",
            r"(?i)[a-z][a-z0-9+.\-]*://[^/\s:@]+:[^@\s]+@",
        ),
    ];
    rules
        .iter()
        .map(|(id, pattern)| SecretRuleSpec {
            id: id.to_string(),
            pattern: pattern.to_string(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_calibration() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.weights.security, 0.45);
        assert_eq!(cfg.weights.correctness, 0.35);
        assert_eq!(cfg.weights.performance, 0.15);
        assert_eq!(cfg.weights.style, 0.05);
        assert_eq!(cfg.thresholds.complexity, 15);
        assert_eq!(cfg.thresholds.nesting, 4);
        assert_eq!(cfg.thresholds.entropy, 3.5);
        assert_eq!(cfg.thresholds.secret_min_length, 20);
        assert_eq!(cfg.bootstrap_iterations, 1000);
        assert_eq!(cfg.security.secret_rules.len(), 11);
    }

    #[test]
    fn patch_scaling_rounds_up() {
        let t = Thresholds::default();
        assert_eq!(t.patch_scaled(2, crate::facts::Mode::Patch), 3);
        assert_eq!(t.patch_scaled(3, crate::facts::Mode::Patch), 5);
        assert_eq!(t.patch_scaled(2, crate::facts::Mode::Full), 2);
    }

    #[test]
    fn partial_toml_overrides_keep_defaults() {
        let cfg = RunConfig::from_toml("rng_seed = 7\n[thresholds]\ncomplexity = 10\n").unwrap();
        assert_eq!(cfg.rng_seed, 7);
        assert_eq!(cfg.thresholds.complexity, 10);
        assert_eq!(cfg.thresholds.nesting, 4); // untouched default
        assert_eq!(cfg.bootstrap_iterations, 1000);
    }

    #[test]
    fn bad_toml_is_a_config_error() {
        assert!(RunConfig::from_toml("rng_seed = \"not a number\"").is_err());
    }
}
