// grass: command-line front end for Grassmann coding, dictionary learning
// and the synthetic classification harness.

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "grassmann/grassmann.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace grassmann;

namespace {

struct KeyInfo {
  const char* name;
  const char* help;
};

// Every key may appear in a --config file or as a --key override.
const KeyInfo kKeys[] = {
    {"method", "gsc | glc | kgsc | kglc | loge"},
    {"lambda", "sparsity weight"},
    {"nlc", "neighbours used by locality-constrained coding"},
    {"ridge", "ridge added to the local affine system"},
    {"kernel", "linear | gaussian:GAMMA | polynomial:DEGREE:OFFSET (kernel methods only)"},
    {"base", "Log-Euclidean base point: canonical | frechet"},
    {"p", "subspace order"},
    {"modeling", "appearance | arma"},
    {"n", "ARMA state order (defaults to p)"},
    {"m_obs", "observability blocks for ARMA subspaces"},
    {"center", "subtract the mean frame before modeling"},
    {"unit_variance", "scale frames to unit variance before modeling"},
    {"n_atoms", "dictionary size (per class with per_class)"},
    {"n_iter", "dictionary learning iterations"},
    {"max_support", "training items kept in a kernel atom's support"},
    {"per_class", "learn a separate labeled dictionary for every class"},
    {"split", "manifest split to read; empty reads every entry"},
    {"train_split", "split holding dictionary atoms in classify"},
    {"test_split", "split holding queries in classify"},
    {"seed", "random seed"},
    {"threads", "worker cap (0 = all cores)"},
    {"max_iter", "sparse solver iteration cap"},
    {"tol", "sparse solver tolerance"},
    {"experiment", "synthetic protocol: 1 (structured means) or 2 (random means)"},
    {"preset", "easy | medium | hard | very_hard"},
    {"trials", "synthetic trials, seeds seed .. seed+trials-1"},
    {"classes", "synthetic classes"},
    {"d", "synthetic ambient dimension"},
    {"dict_per_class", "synthetic dictionary points per class"},
    {"query_per_class", "synthetic queries per class"},
    {"sigma", "synthetic spread, overrides the preset"},
    {"per_entry_sigma", "treat sigma as a per-coordinate tangent deviation"},
    {"mean_offset", "geodesic offset of structured class means"},
    {"d_grid", "bench ambient dimensions, comma separated"},
    {"bench_atoms", "bench dictionary size"},
    {"bench_queries", "bench queries per size"},
    {"methods", "bench methods, comma separated"},
    {"reps", "bench repetitions (fastest is reported)"},
};

bool known_key(const std::string& k) {
  for (const auto& info : kKeys)
    if (k == info.name) return true;
  return false;
}

Error invalid(const std::string& what) { return Error(ErrorCode::InvalidArgument, what); }

class Settings {
 public:
  void set(const std::string& key, const std::string& value, const std::string& origin) {
    if (!known_key(key)) throw invalid(origin + ": unknown key '" + key + "'");
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string text(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double real(const std::string& key, double fallback) const {
    return has(key) ? io::parse_double(values_.at(key), key) : fallback;
  }

  long long integer(const std::string& key, long long fallback) const {
    return has(key) ? io::parse_int(values_.at(key), key) : fallback;
  }

  long long positive(const std::string& key, long long fallback) const {
    const long long v = integer(key, fallback);
    if (v < 1) throw invalid(key + " must be >= 1");
    return v;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = values_.at(key);
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw invalid(key + ": expected a boolean, got '" + v + "'");
  }

  const io::KeyValues& values() const { return values_; }

 private:
  io::KeyValues values_;
};

struct Paths {
  std::string config, manifest, dict, out;
};

void require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw invalid(std::string("missing required ") + flag);
}

unsigned thread_count(const Settings& s) {
  const long long t = s.integer("threads", 1);
  if (t < 0) throw invalid("threads must be >= 0");
  return static_cast<unsigned>(t);
}

SolverConfig solver_config(const Settings& s) {
  SolverConfig c;
  c.max_iter = static_cast<int>(s.positive("max_iter", c.max_iter));
  c.tol = s.real("tol", c.tol);
  c.validate();
  return c;
}

LogEBase loge_base(const Settings& s) {
  const std::string b = s.text("base", "canonical");
  if (b == "canonical") return LogEBase::Canonical;
  if (b == "frechet") return LogEBase::Frechet;
  throw invalid("base must be canonical or frechet, got '" + b + "'");
}

// A kernel spec is required exactly when the method is a kernel method.
KernelFunction kernel_for(const Settings& s, CodingMethod method) {
  if (is_kernel_method(method)) {
    if (!s.has("kernel")) throw invalid(std::string(to_string(method)) + " needs --kernel");
    return KernelFunction::parse(s.text("kernel", ""));
  }
  if (s.has("kernel")) throw invalid("--kernel only applies to kgsc and kglc");
  return KernelFunction::linear();
}

MethodConfig method_config(const Settings& s) {
  MethodConfig mc;
  mc.method = parse_coding_method(s.text("method", "gsc"));
  mc.lambda = s.real("lambda", mc.lambda);
  if (mc.lambda < 0.0) throw invalid("lambda must be >= 0");
  mc.n_lc = static_cast<int>(s.positive("nlc", mc.n_lc));
  mc.ridge = s.real("ridge", mc.ridge);
  if (mc.ridge < 0.0) throw invalid("ridge must be >= 0");
  mc.kernel = kernel_for(s, mc.method);
  mc.loge_base = loge_base(s);
  mc.solver = solver_config(s);
  mc.threads = thread_count(s);
  return mc;
}

// Entry ids double as file names.
void require_safe_id(const std::string& id) {
  const bool ok = !id.empty() && id.front() != '.' &&
                  std::all_of(id.begin(), id.end(), [](unsigned char c) {
                    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
                  });
  if (!ok) throw invalid("entry id '" + id + "' is not usable as a file name");
}

std::string id_with_index(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
  return buf;
}

// ---------------------------------------------------------------------------
// Loading coding inputs

struct KernelItems {
  std::vector<std::string> ids;
  std::vector<KernelSubspace> items;
  std::vector<int> labels;
};

// Kernel inputs come either from a subspace index (basis columns are the
// samples) or from a samples manifest of raw d x tau matrices.
KernelItems load_kernel_items(const io::Manifest& m, const std::string& split, Eigen::Index p,
                              const KernelFunction& kernel) {
  KernelItems out;
  if (m.kind() == "subspace") {
    const io::SubspaceSet set = io::load_subspaces(m, split);
    for (const auto& x : set.points) out.items.push_back(gram_basis(x.basis(), x.order(), kernel));
    out.ids = set.ids;
    out.labels = set.labels;
    return out;
  }
  const bool center = m.flag("center"), unit = m.flag("unit_variance");
  for (const io::ManifestEntry* e : m.select(split)) {
    try {
      const ObservationMatrix obs = preprocess(io::read_matrix(m.resolve(*e)), center, unit);
      out.items.push_back(gram_basis(obs.data, p, kernel));
    } catch (const Error& err) {
      throw Error(err.code(), "entry '" + e->id + "': " + err.what());
    }
    out.ids.push_back(e->id);
    out.labels.push_back(e->label);
  }
  return out;
}

io::SubspaceSet load_explicit(const io::Manifest& m, const std::string& split) {
  if (m.kind() != "subspace") throw invalid("expected a subspace index (kind=subspace); run `grass model` first");
  io::SubspaceSet set = io::load_subspaces(m, split);
  if (set.points.empty()) throw invalid("no entries in split '" + split + "'");
  return set;
}

// ---------------------------------------------------------------------------
// model

int cmd_model(const Settings& s, const Paths& paths) {
  require_path(paths.manifest, "--manifest");
  require_path(paths.out, "--out");
  const io::Manifest m = io::read_manifest(paths.manifest);
  if (m.kind() != "samples") throw invalid("model expects a samples manifest");
  const std::string modeling = s.text("modeling", "appearance");
  if (modeling != "appearance" && modeling != "arma") throw invalid("modeling must be appearance or arma");
  const Eigen::Index p = s.positive("p", 2);
  const Eigen::Index n = s.positive("n", p);
  const Eigen::Index m_obs = s.positive("m_obs", 3);
  const bool center = s.boolean("center", m.flag("center"));
  const bool unit = s.boolean("unit_variance", m.flag("unit_variance"));

  const auto entries = m.select(s.text("split", ""));
  for (const auto* e : entries) require_safe_id(e->id);
  std::vector<std::optional<GrassmannPoint>> points(entries.size());
  std::vector<std::optional<Error>> failures(entries.size());
  parallel_for(entries.size(), thread_count(s), [&](std::size_t i) {
    try {
      const ObservationMatrix obs = preprocess(io::read_matrix(m.resolve(*entries[i])), center, unit);
      points[i] = modeling == "arma" ? observability_subspace(fit_arma(obs, n), m_obs) : appearance_subspace(obs, p);
    } catch (const Error& err) {
      failures[i] = err;
    }
  });

  int rc = 0;
  io::Manifest index;
  index.root = paths.out;
  index.globals = {{"kind", "subspace"}, {"modeling", modeling}};
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = *entries[i];
    if (failures[i]) {
      spdlog::error("entry '{}': {}", e.id, failures[i]->what());
      rc = std::max(rc, failures[i]->is_validation() ? 2 : 3);
      continue;
    }
    io::write_subspace(fs::path(paths.out) / (e.id + ".csv"), *points[i]);
    index.globals["d"] = std::to_string(points[i]->ambient());
    index.globals["p"] = std::to_string(points[i]->order());
    index.entries.push_back(io::ManifestEntry{e.id, e.id + ".csv", e.label, e.split});
  }
  io::write_manifest(fs::path(paths.out) / "index.txt", index);
  std::cout << "modeled " << index.entries.size() << " of " << entries.size() << " entries (" << modeling << ")\n";
  return rc;
}

// ---------------------------------------------------------------------------
// learn

struct TraceRow {
  int cls;
  std::size_t iteration;
  double objective;
  double change;
};

DLConfig dl_config(const Settings& s, CodingMethod method) {
  DLConfig cfg;
  cfg.n_atoms = static_cast<std::size_t>(s.positive("n_atoms", static_cast<long long>(cfg.n_atoms)));
  cfg.n_iter = static_cast<int>(s.positive("n_iter", cfg.n_iter));
  cfg.lambda = s.real("lambda", cfg.lambda);
  cfg.coding = is_local_method(method) ? CodingMethod::gLC : CodingMethod::gSC;
  cfg.n_lc = static_cast<int>(s.positive("nlc", cfg.n_lc));
  cfg.ridge = s.real("ridge", cfg.ridge);
  cfg.seed = static_cast<std::uint64_t>(s.integer("seed", 1));
  cfg.max_support = static_cast<std::size_t>(s.positive("max_support", static_cast<long long>(cfg.max_support)));
  cfg.solver = solver_config(s);
  cfg.threads = thread_count(s);
  return cfg;
}

void append_trace(std::vector<TraceRow>& rows, int cls, const DLTrace& t) {
  rows.push_back({cls, 0, t.initial_objective, 0.0});
  for (std::size_t i = 0; i < t.objective.size(); ++i) rows.push_back({cls, i + 1, t.objective[i], t.max_atom_change[i]});
}

// Index groups: one per class with per_class, else a single group.
std::vector<std::pair<int, std::vector<std::size_t>>> groups_of(const std::vector<int>& labels, bool per_class) {
  std::vector<std::pair<int, std::vector<std::size_t>>> groups;
  if (!per_class) {
    std::vector<std::size_t> all(labels.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    groups.emplace_back(-1, std::move(all));
    return groups;
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (auto& [c, idx] : by_class) groups.emplace_back(c, std::move(idx));
  return groups;
}

int cmd_learn(const Settings& s, const Paths& paths) {
  require_path(paths.manifest, "--manifest");
  require_path(paths.out, "--out");
  const CodingMethod method = parse_coding_method(s.text("method", "gsc"));
  if (method == CodingMethod::logE) throw invalid("learn supports gsc, glc, kgsc and kglc");
  const KernelFunction kernel = kernel_for(s, method);
  const DLConfig cfg = dl_config(s, method);
  const bool per_class = s.boolean("per_class", false);
  const std::string split = s.text("split", "");
  const io::Manifest m = io::read_manifest(paths.manifest);

  std::vector<TraceRow> trace;
  std::vector<int> atom_labels;
  const fs::path out(paths.out);
  if (is_kernel_method(method)) {
    const KernelItems train = load_kernel_items(m, split, s.positive("p", 2), kernel);
    if (train.items.empty()) throw invalid("no training entries");
    std::vector<KernelSubspace> atoms;
    for (const auto& [cls, idx] : groups_of(train.labels, per_class)) {
      std::vector<KernelSubspace> items;
      for (std::size_t i : idx) items.push_back(train.items[i]);
      const KgdlResult res = kgdl_learn(items, cfg);
      append_trace(trace, cls, res.trace);
      for (double e : res.trace.orthonormality_error) spdlog::debug("class {} atom orthonormality error {:.3e}", cls, e);
      for (const auto& a : res.dictionary.atoms()) {
        atoms.push_back(a);
        if (per_class) atom_labels.push_back(cls);
      }
    }
    io::save_dictionary(out, KernelDictionary(std::move(atoms), atom_labels), to_string(method));
  } else {
    const io::SubspaceSet train = load_explicit(m, split);
    std::vector<GrassmannPoint> atoms;
    for (const auto& [cls, idx] : groups_of(train.labels, per_class)) {
      std::vector<GrassmannPoint> items;
      for (std::size_t i : idx) items.push_back(train.points[i]);
      const GdlResult res = gdl_learn(items, cfg);
      append_trace(trace, cls, res.trace);
      for (const auto& a : res.dictionary.atoms()) {
        atoms.push_back(a);
        if (per_class) atom_labels.push_back(cls);
      }
    }
    io::save_dictionary(out, GrassmannDictionary(std::move(atoms), atom_labels), to_string(method));
  }

  std::string csv = per_class ? "class,iteration,objective,max_atom_change\n" : "iteration,objective,max_atom_change\n";
  for (const auto& r : trace) {
    if (per_class) csv += std::to_string(r.cls) + ",";
    csv += std::to_string(r.iteration) + "," + io::format_double(r.objective) + "," + io::format_double(r.change) + "\n";
  }
  io::atomic_write(out / "trace.csv", csv);
  std::cout << "learned " << (per_class ? "per-class " : "") << to_string(method) << " dictionary, final objective "
            << io::format_double(trace.back().objective) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// code

struct CodedSet {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<CodeVector> codes;
  std::vector<int> predicted;  // filled only when the dictionary is labeled
};

void require_query_shape(const GrassmannPoint& x, const io::DictionaryMeta& meta, const std::string& id) {
  if (x.ambient() != meta.d || x.order() != meta.p)
    throw Error(ErrorCode::DimensionMismatch, "query '" + id + "' lies on G(" + std::to_string(x.order()) + "," +
                                                  std::to_string(x.ambient()) + ") but the dictionary is on G(" +
                                                  std::to_string(meta.p) + "," + std::to_string(meta.d) + ")");
}

// Codes every selected manifest entry against a saved dictionary and, if the
// atoms carry labels, classifies by class residual.
CodedSet code_against_dictionary(const Settings& s, const fs::path& dict_dir, const io::Manifest& m,
                                 const std::string& split) {
  const io::DictionaryMeta meta = io::read_meta(dict_dir);
  const CodingMethod method = parse_coding_method(s.text("method", meta.method));
  const double lambda = s.real("lambda", 0.1);
  if (lambda < 0.0) throw invalid("lambda must be >= 0");
  const int n_lc = static_cast<int>(s.positive("nlc", 5));
  const double ridge = s.real("ridge", 1e-6);
  const SolverConfig solver = solver_config(s);
  const unsigned threads = thread_count(s);
  const bool labeled = !meta.labels.empty();
  CodedSet out;

  if (meta.kind == "kernel") {
    if (!is_kernel_method(method)) throw invalid("a kernel dictionary needs method kgsc or kglc");
    if (s.has("kernel") && !(KernelFunction::parse(s.text("kernel", "")) == meta.kernel))
      throw Error(ErrorCode::KernelMismatch, "--kernel differs from the dictionary kernel " + meta.kernel.to_string());
    const KernelDictionary dict = io::load_kernel_dictionary(dict_dir);
    const KernelItems q = load_kernel_items(m, split, meta.p, meta.kernel);
    out.ids = q.ids;
    out.labels = q.labels;
    out.codes.resize(q.items.size());
    out.predicted.resize(labeled ? q.items.size() : 0);
    parallel_for(q.items.size(), threads, [&](std::size_t i) {
      if (q.items[i].sample_dim() != meta.d || q.items[i].order() != meta.p)
        throw Error(ErrorCode::DimensionMismatch, "query '" + q.ids[i] + "' does not match the dictionary shape");
      out.codes[i] = method == CodingMethod::kgSC ? kgsc_encode(dict, q.items[i], lambda, solver)
                                                  : kglc_encode(dict, q.items[i], n_lc, ridge, solver);
      if (labeled) out.predicted[i] = residual_classify(dict, q.items[i], out.codes[i]).label;
    });
    return out;
  }

  if (is_kernel_method(method)) throw invalid("an explicit dictionary needs method gsc, glc or loge");
  if (s.has("kernel")) throw invalid("--kernel only applies to kernel dictionaries");
  const GrassmannDictionary dict = io::load_grassmann_dictionary(dict_dir);
  const io::SubspaceSet q = load_explicit(m, split);
  for (std::size_t i = 0; i < q.points.size(); ++i) require_query_shape(q.points[i], meta, q.ids[i]);
  std::optional<LogEuclideanCoder> coder;
  if (method == CodingMethod::logE) {
    const GrassmannPoint base = loge_base(s) == LogEBase::Canonical
                                    ? canonical_point(dict.ambient(), dict.order())
                                    : frechet_mean(std::span<const GrassmannPoint>(dict.atoms()));
    coder.emplace(dict, base);
  }
  out.ids = q.ids;
  out.labels = q.labels;
  out.codes.resize(q.points.size());
  out.predicted.resize(labeled ? q.points.size() : 0);
  parallel_for(q.points.size(), threads, [&](std::size_t i) {
    const auto& x = q.points[i];
    switch (method) {
      case CodingMethod::gSC: out.codes[i] = gsc_encode(dict, x, lambda, solver); break;
      case CodingMethod::gLC: out.codes[i] = glc_encode(dict, x, n_lc, ridge, solver); break;
      default: out.codes[i] = coder->encode(x, lambda, solver); break;
    }
    if (labeled)
      out.predicted[i] = coder ? residual_classify(*coder, dict.labels(), x, out.codes[i]).label
                               : residual_classify(dict, x, out.codes[i]).label;
  });
  return out;
}

int cmd_code(const Settings& s, const Paths& paths) {
  require_path(paths.dict, "--dict");
  require_path(paths.manifest, "--manifest");
  require_path(paths.out, "--out");
  const io::Manifest m = io::read_manifest(paths.manifest);
  const CodedSet coded = code_against_dictionary(s, paths.dict, m, s.text("split", ""));

  std::string csv = "id,converged";
  const Eigen::Index n = coded.codes.empty() ? 0 : coded.codes.front().coeffs.size();
  for (Eigen::Index j = 0; j < n; ++j) csv += ",y" + std::to_string(j);
  csv += "\n";
  std::size_t zero = 0, unconverged = 0;
  for (std::size_t i = 0; i < coded.codes.size(); ++i) {
    const CodeVector& c = coded.codes[i];
    csv += coded.ids[i] + "," + (c.converged ? "1" : "0");
    for (Eigen::Index j = 0; j < n; ++j) csv += "," + io::format_double(c.coeffs(j));
    csv += "\n";
    if (c.coeffs.isZero(0.0)) {
      ++zero;
      spdlog::warn("query '{}' has an all-zero code", coded.ids[i]);
    }
    if (!c.converged) ++unconverged;
  }
  io::atomic_write(fs::path(paths.out) / "codes.csv", csv);
  std::cout << "coded " << coded.codes.size() << " queries; all-zero " << zero << "; not converged " << unconverged
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// classify

SyntheticSpec synthetic_spec(const Settings& s, std::uint64_t seed) {
  const long long experiment = s.integer("experiment", 1);
  if (experiment != 1 && experiment != 2) throw invalid("experiment must be 1 or 2");
  const Difficulty diff = parse_difficulty(s.text("preset", "easy"));
  SyntheticSpec spec = experiment == 1 ? SyntheticSpec::experiment1(diff, seed) : SyntheticSpec::experiment2(diff, seed);
  spec.classes = static_cast<int>(s.positive("classes", spec.classes));
  spec.d = s.positive("d", spec.d);
  spec.p = s.positive("p", spec.p);
  spec.dict_per_class = static_cast<int>(s.positive("dict_per_class", spec.dict_per_class));
  spec.query_per_class = static_cast<int>(s.positive("query_per_class", spec.query_per_class));
  spec.sigma = s.real("sigma", spec.sigma);
  spec.per_entry_sigma = s.boolean("per_entry_sigma", spec.per_entry_sigma);
  spec.mean_offset = s.real("mean_offset", spec.mean_offset);
  spec.validate();
  return spec;
}

json confusion_json(const std::vector<int>& classes, const std::vector<std::vector<int>>& confusion) {
  return json{{"classes", classes}, {"matrix", confusion}};
}

struct Tally {
  double accuracy = 0.0;
  std::vector<int> classes;
  std::vector<std::vector<int>> confusion;
};

Tally tally(const std::vector<int>& truth, const std::vector<int>& predicted) {
  Tally t;
  std::set<int> cls(truth.begin(), truth.end());
  cls.insert(predicted.begin(), predicted.end());
  t.classes.assign(cls.begin(), cls.end());
  const auto pos = [&](int c) { return std::lower_bound(t.classes.begin(), t.classes.end(), c) - t.classes.begin(); };
  t.confusion.assign(t.classes.size(), std::vector<int>(t.classes.size(), 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++t.confusion[static_cast<std::size_t>(pos(truth[i]))][static_cast<std::size_t>(pos(predicted[i]))];
    correct += truth[i] == predicted[i];
  }
  t.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
  return t;
}

int classify_dataset(const Settings& s, const Paths& paths) {
  const io::Manifest m = io::read_manifest(paths.manifest);
  std::vector<std::string> ids;
  std::vector<int> truth, predicted;
  if (!paths.dict.empty()) {
    const CodedSet coded = code_against_dictionary(s, paths.dict, m, s.text("test_split", "test"));
    if (coded.predicted.size() != coded.codes.size()) throw invalid("classification needs a labeled dictionary");
    ids = coded.ids;
    truth = coded.labels;
    predicted = coded.predicted;
  } else {
    // Every training entry becomes a labeled atom.
    const MethodConfig mc = method_config(s);
    const io::SubspaceSet train = load_explicit(m, s.text("train_split", "train"));
    const io::SubspaceSet test = load_explicit(m, s.text("test_split", "test"));
    const ExperimentMetrics metrics = run_experiment(LabeledPoints{train.points, train.labels},
                                                     LabeledPoints{test.points, test.labels}, mc);
    ids = test.ids;
    truth = test.labels;
    predicted = metrics.predictions;
  }
  const Tally t = tally(truth, predicted);
  if (!paths.out.empty()) {
    std::string csv = "id,label,predicted\n";
    for (std::size_t i = 0; i < ids.size(); ++i)
      csv += ids[i] + "," + std::to_string(truth[i]) + "," + std::to_string(predicted[i]) + "\n";
    io::atomic_write(fs::path(paths.out) / "predictions.csv", csv);
    const json j{{"accuracy", t.accuracy},
                 {"queries", ids.size()},
                 {"confusion", confusion_json(t.classes, t.confusion)},
                 {"config", s.values()}};
    io::atomic_write(fs::path(paths.out) / "metrics.json", j.dump(2) + "\n");
  }
  std::cout << "accuracy " << io::format_double(t.accuracy) << " (" << ids.size() << " queries)\n";
  return 0;
}

int classify_synthetic(const Settings& s, const Paths& paths) {
  const MethodConfig mc = method_config(s);
  const auto first = static_cast<std::uint64_t>(s.integer("seed", 1));
  const auto trials = static_cast<std::size_t>(s.positive("trials", 10));
  std::vector<std::uint64_t> seeds(trials);
  for (std::size_t i = 0; i < trials; ++i) seeds[i] = first + i;
  const SyntheticSpec spec = synthetic_spec(s, first);
  const TrialSummary summary = run_trials(spec, mc, seeds);

  char line[256];
  std::snprintf(line, sizeof line, "%s experiment=%lld preset=%s trials=%zu accuracy=%.4f +- %.4f",
                to_string(mc.method), s.integer("experiment", 1), s.text("preset", "easy").c_str(), trials,
                summary.accuracy_mean, summary.accuracy_std);
  std::cout << line << "\n";
  if (paths.out.empty()) return 0;

  // Timing columns are the only fields that differ between reruns.
  std::string csv = "trial,seed,accuracy,not_converged,objective_mean,objective_std,mean_code_seconds\n";
  json trial_json = json::array();
  for (std::size_t i = 0; i < trials; ++i) {
    const ExperimentMetrics& t = summary.trials[i];
    csv += std::to_string(i) + "," + std::to_string(seeds[i]) + "," + io::format_double(t.accuracy) + "," +
           std::to_string(t.not_converged) + "," + io::format_double(t.objective_mean) + "," +
           io::format_double(t.objective_std) + "," + io::format_double(t.mean_code_seconds) + "\n";
    trial_json.push_back({{"seed", seeds[i]},
                          {"accuracy", t.accuracy},
                          {"not_converged", t.not_converged},
                          {"confusion", confusion_json(t.classes, t.confusion)}});
  }
  io::KeyValues resolved = s.values();
  resolved["method"] = to_string(mc.method);
  resolved["sigma"] = io::format_double(spec.sigma);
  resolved["trials"] = std::to_string(trials);
  const std::string hash = io::fnv1a_hex(io::key_values_to_text(resolved));
  const json j{{"config", resolved},
               {"config_hash", hash},
               {"accuracy_mean", summary.accuracy_mean},
               {"accuracy_std", summary.accuracy_std},
               {"trials", trial_json}};
  io::atomic_write(fs::path(paths.out) / "trials.csv", csv);
  io::atomic_write(fs::path(paths.out) / ("results_" + hash + ".json"), j.dump(2) + "\n");
  return 0;
}

int cmd_classify(const Settings& s, const Paths& paths) {
  if (!paths.manifest.empty()) return classify_dataset(s, paths);
  if (!paths.dict.empty()) throw invalid("--dict needs --manifest with the queries");
  return classify_synthetic(s, paths);
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const Settings& s, const Paths& paths) {
  require_path(paths.out, "--out");
  const SyntheticSpec spec = synthetic_spec(s, static_cast<std::uint64_t>(s.integer("seed", 1)));
  const SyntheticDataset data = generate_synthetic(spec);
  const fs::path out(paths.out);

  io::Manifest index;
  index.root = out;
  index.globals = {{"kind", "subspace"},
                   {"d", std::to_string(spec.d)},
                   {"p", std::to_string(spec.p)},
                   {"experiment", s.text("experiment", "1")},
                   {"preset", s.text("preset", "easy")},
                   {"sigma", io::format_double(spec.sigma)},
                   {"seed", std::to_string(spec.seed)}};
  auto emit = [&](const LabeledPoints& set, const char* prefix, const std::string& split) {
    for (std::size_t i = 0; i < set.points.size(); ++i) {
      const std::string id = id_with_index(prefix, i);
      const std::string rel = split + "/" + id + ".csv";
      io::write_subspace(out / rel, set.points[i]);
      index.entries.push_back(io::ManifestEntry{id, rel, set.labels[i], split});
    }
  };
  emit(data.dictionary, "a", "train");
  emit(data.queries, "q", "test");
  for (std::size_t k = 0; k < data.class_means.size(); ++k)
    io::write_subspace(out / "means" / ("class_" + std::to_string(k) + ".csv"), data.class_means[k]);
  io::write_manifest(out / "index.txt", index);
  std::cout << "wrote " << data.dictionary.points.size() << " training and " << data.queries.points.size()
            << " query subspaces to " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bench

std::vector<std::string> list_of(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& item : io::split(text)) {
    const std::string t = io::trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

int cmd_bench(const Settings& s, const Paths& paths) {
  std::vector<Eigen::Index> grid;
  for (const auto& t : list_of(s.text("d_grid", "8,32,128,512"))) grid.push_back(io::parse_int(t, "d_grid"));
  std::vector<CodingMethod> methods;
  for (const auto& t : list_of(s.text("methods", "gsc,glc,kgsc,kglc,loge"))) methods.push_back(parse_coding_method(t));
  if (grid.empty() || methods.empty()) throw invalid("bench needs a non-empty d_grid and method list");
  const Eigen::Index p = s.positive("p", 2);
  for (Eigen::Index d : grid)
    if (d <= p) throw invalid("every d in d_grid must exceed p");
  const auto n_atoms = static_cast<std::size_t>(s.positive("bench_atoms", 16));
  const auto n_queries = static_cast<std::size_t>(s.positive("bench_queries", 50));
  const long long reps = s.positive("reps", 3);
  MethodConfig mc;
  mc.lambda = s.real("lambda", mc.lambda);
  mc.n_lc = static_cast<int>(s.positive("nlc", std::min<long long>(mc.n_lc, static_cast<long long>(n_atoms))));
  mc.kernel = KernelFunction::parse(s.text("kernel", "linear"));
  mc.solver = solver_config(s);
  mc.threads = thread_count(s);
  std::mt19937_64 rng(static_cast<std::uint64_t>(s.integer("seed", 1)));

  std::string csv = "method,p,d,atoms,queries,seconds,queries_per_sec\n";
  std::cout << "method    d      seconds      queries/s\n";
  for (Eigen::Index d : grid) {
    LabeledPoints atoms, queries;
    for (std::size_t i = 0; i < n_atoms; ++i) {
      atoms.points.push_back(random_point(d, p, rng));
      atoms.labels.push_back(static_cast<int>(i % 2));
    }
    for (std::size_t i = 0; i < n_queries; ++i) {
      queries.points.push_back(random_point(d, p, rng));
      queries.labels.push_back(0);
    }
    for (CodingMethod method : methods) {
      mc.method = method;
      double best = std::numeric_limits<double>::infinity();
      for (long long r = 0; r < reps; ++r) {
        const auto start = std::chrono::steady_clock::now();
        run_experiment(atoms, queries, mc);
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      }
      const double qps = static_cast<double>(n_queries) / best;
      csv += std::string(to_string(method)) + "," + std::to_string(p) + "," + std::to_string(d) + "," +
             std::to_string(n_atoms) + "," + std::to_string(n_queries) + "," + io::format_double(best) + "," +
             io::format_double(qps) + "\n";
      char row[128];
      std::snprintf(row, sizeof row, "%-8s %5lld %12.6f %14.1f", to_string(method), static_cast<long long>(d), best, qps);
      std::cout << row << "\n";
    }
  }
  if (!paths.out.empty()) io::atomic_write(fs::path(paths.out) / "bench.csv", csv);
  return 0;
}

// ---------------------------------------------------------------------------

void setup_logging() {
  auto logger = spdlog::stderr_logger_st("grass");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("GRASS_LOG")) {
    const std::string v = env;
    if (v == "debug") spdlog::set_level(spdlog::level::debug);
    else if (v == "info") spdlog::set_level(spdlog::level::info);
    else if (v == "warn") spdlog::set_level(spdlog::level::warn);
    else spdlog::warn("ignoring GRASS_LOG='{}' (expected debug, info or warn)", v);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Coding, dictionary learning and classification on Grassmann manifolds"};
  app.require_subcommand(1);
  app.fallthrough();

  Paths paths;
  app.add_option("--config", paths.config, "flat key=value file; command-line flags override it");
  app.add_option("--manifest", paths.manifest, "dataset manifest or subspace index");
  app.add_option("--dict", paths.dict, "dictionary directory");
  app.add_option("--out", paths.out, "output directory");
  std::map<std::string, std::string> overrides;
  std::map<std::string, CLI::Option*> options;
  for (const auto& info : kKeys) {
    std::string flags = std::string("--") + info.name;
    std::string dashed = info.name;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    if (dashed != info.name) flags += ",--" + dashed;
    options[info.name] = app.add_option(flags, overrides[info.name], info.help);
  }

  std::map<std::string, std::function<int(const Settings&, const Paths&)>> commands{
      {"model", cmd_model}, {"learn", cmd_learn}, {"code", cmd_code},
      {"classify", cmd_classify}, {"synth", cmd_synth}, {"bench", cmd_bench}};
  const std::map<std::string, std::string> about{
      {"model", "fit appearance or ARMA subspaces to every manifest entry"},
      {"learn", "learn a Grassmann (gdl) or kernel (kgdl) dictionary"},
      {"code", "code subspaces against a dictionary"},
      {"classify", "residual classification of a dataset or synthetic trials"},
      {"synth", "write a synthetic dataset"},
      {"bench", "time coding throughput across ambient dimensions"}};
  for (const auto& [name, help] : about) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    Settings settings;
    if (!paths.config.empty())
      for (const auto& [k, v] : io::parse_key_values(io::read_text(paths.config), paths.config))
        settings.set(k, v, paths.config);
    for (const auto& [k, opt] : options)
      if (opt->count() > 0) settings.set(k, overrides[k], "command line");
    const std::string name = app.get_subcommands().front()->get_name();
    spdlog::debug("running {}", name);
    return commands.at(name)(settings, paths);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return e.is_validation() ? 2 : 3;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
}
