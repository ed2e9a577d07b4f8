#include "mces/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <tuple>
#include <utility>

#include <fmt/core.h>

#include "mces/csv.hpp"
#include "mces/error.hpp"
#include "mces/log.hpp"

namespace mces {
namespace {

Var bind_tensor(Tape& tape, Tensor& t) { return tape.parameter(t); }
Var bind_tensor(Tape& tape, const Tensor& t) { return tape.constant(t.value); }

Var lookup(Tape& tape, Tensor& table, const std::vector<int>& rows) { return tape.gather_rows(table, rows); }

Var lookup(Tape& tape, const Tensor& table, const std::vector<int>& rows) {
  Matrix out(static_cast<Index>(rows.size()), table.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= table.rows()) {
      throw DataError(fmt::format("bucket {} outside embedding table of {} rows", rows[r], table.rows()));
    }
    out.row(static_cast<Index>(r)) = table.value.row(rows[r]);
  }
  return tape.constant(std::move(out));
}

Matrix row_of(std::span<const double> values) {
  Matrix m(1, static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) m(0, static_cast<Index>(i)) = values[i];
  return m;
}

std::size_t window_length(const Batch& batch) {
  if (batch.empty()) throw StateError("empty batch");
  const std::size_t length = batch.front()->length;
  if (length == 0) throw ConfigError("window length must be at least 1");
  for (const Window* w : batch) {
    if (w->length != length) throw ConfigError(fmt::format("batch mixes window lengths {} and {}", length, w->length));
  }
  return length;
}

// Targets and weights in batch row order (row = t * B + b).
std::pair<Matrix, Matrix> targets(const Batch& batch, const LossSpec& loss) {
  const std::size_t length = window_length(batch);
  const std::size_t b_count = batch.size();
  const Index n = static_cast<Index>(length * b_count);
  Matrix target(n, 1);
  Matrix weight(n, 1);
  for (std::size_t b = 0; b < b_count; ++b) {
    const Window& w = *batch[b];
    const auto& sim = w.simulated(loss.task);
    const auto& obs = w.observed(loss.task);
    const auto& mask = w.mask(loss.task);
    for (std::size_t t = 0; t < length; ++t) {
      const Index r = static_cast<Index>(t * b_count + b);
      if (loss.kind == LossKind::kRefine && mask[t]) {
        target(r, 0) = obs[t];
        weight(r, 0) = 1.0;
      } else {
        target(r, 0) = sim[t];
        weight(r, 0) = loss.kind == LossKind::kRefine ? loss.rho : 1.0;
      }
    }
  }
  return {std::move(target), std::move(weight)};
}

const char* const kCheckpointMagic = "mces-checkpoint";
constexpr int kCheckpointVersion = 1;

std::vector<std::string> dense_names(std::size_t fields) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < fields; ++i) names.push_back(fmt::format("embedding.{}", i));
  for (const char* n : {"op.concat", "op.kernel", "lstm.input", "lstm.recurrent", "lstm.bias", "head.weight",
                        "head.bias"}) {
    names.emplace_back(n);
  }
  return names;
}

class TokenReader {
 public:
  TokenReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw DataError(fmt::format("{}: unexpected end of checkpoint", source_));
    return w;
  }
  void expect(std::string_view keyword) {
    const std::string w = word();
    if (w != keyword) throw DataError(fmt::format("{}: expected '{}', found '{}'", source_, keyword, w));
  }
  double number() {
    const std::string w = word();
    double v = 0.0;
    if (!csv::parse_double(w, v)) throw DataError(fmt::format("{}: bad number '{}'", source_, w));
    return v;
  }
  long integer() {
    const std::string w = word();
    long v = 0;
    if (!csv::parse_long(w, v)) throw DataError(fmt::format("{}: bad integer '{}'", source_, w));
    return v;
  }
  std::uint64_t unsigned64() {
    const std::string w = word();
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc{} || ptr != w.data() + w.size()) throw DataError(fmt::format("{}: bad hash '{}'", source_, w));
    return v;
  }
  void matrix(Matrix& m) {
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = number();
  }
  const std::string& source() const { return source_; }

 private:
  std::istream& in_;
  std::string source_;
};

void write_values(std::string& out, const Matrix& m) {
  for (Index i = 0; i < m.size(); ++i) {
    out += ' ';
    out += csv::format_double(m.data()[i]);
  }
}

template <typename T>
void write_list(std::string& out, std::string_view key, const std::vector<T>& values) {
  out += key;
  for (const T& v : values) {
    out += ' ';
    if constexpr (std::is_floating_point_v<T>) {
      out += csv::format_double(v);
    } else {
      out += fmt::format("{}", static_cast<long>(v));
    }
  }
  out += '\n';
}

}  // namespace

Predictor::Predictor(const FeatureSchema& schema, Genome genome, const ModelConfig& config, Rng& rng)
    : config_(config), schema_hash_(schema.hash()), genome_(std::move(genome)) {
  genome_.check();
  if (genome_.fields != schema.size()) {
    throw ConfigError(fmt::format("genome has {} fields, schema has {}", genome_.fields, schema.size()));
  }
  if (config_.embed_dim <= 0 || config_.hidden <= 0) throw ConfigError("embedding and hidden sizes must be positive");
  embeddings_ = EmbeddingTable::random(schema, config_.embed_dim, rng);
  operations_ = OperationParams::random(config_.embed_dim, rng);
  lstm_ = LstmParams::random(input_size(), config_.hidden, rng);
  head_weight_ = Tensor(1, config_.hidden);
  head_bias_ = Tensor(1, 1);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config_.hidden));
  for (Index i = 0; i < head_weight_.size(); ++i) head_weight_.value.data()[i] = uniform(rng, -bound, bound);
  head_bias_.value(0, 0) = uniform(rng, -bound, bound);
  for (const Tensor* p : std::as_const(*this).dense_parameters()) adam_.emplace_back(*p, config_.adam);
  alpha_state_ = GrdaState(genome_.fields, 0.0, config_.grda_alpha);
  beta_state_ = GrdaState(genome_.pairs(), 0.0, config_.grda_beta);
  for (std::size_t i = 0; i < genome_.fields; ++i) alpha_state_.reset(i, genome_.alpha[i]);
  for (std::size_t k = 0; k < genome_.pairs(); ++k) beta_state_.reset(k, genome_.beta[k]);
}

Index Predictor::input_size() const {
  return static_cast<Index>(genome_.fields + genome_.pairs()) * config_.embed_dim;
}

std::vector<Tensor*> Predictor::dense_parameters() {
  std::vector<Tensor*> out;
  for (Tensor& t : embeddings_.tables()) out.push_back(&t);
  out.insert(out.end(), {&operations_.concat_projection, &operations_.kernel, &lstm_.input_weights,
                         &lstm_.recurrent_weights, &lstm_.bias, &head_weight_, &head_bias_});
  return out;
}

std::vector<const Tensor*> Predictor::dense_parameters() const {
  std::vector<const Tensor*> out;
  for (const Tensor& t : embeddings_.tables()) out.push_back(&t);
  out.insert(out.end(), {&operations_.concat_projection, &operations_.kernel, &lstm_.input_weights,
                         &lstm_.recurrent_weights, &lstm_.bias, &head_weight_, &head_bias_});
  return out;
}

void Predictor::freeze() {
  frozen_ = true;
  active_ = prune(genome_);
}

template <typename Self>
Var Predictor::forward_impl(Self& self, Tape& tape, const Batch& batch, Tensor* alpha, Tensor* beta) {
  const std::size_t length = window_length(batch);
  const std::size_t b_count = batch.size();
  const std::size_t m = self.genome_.fields;
  const Index hidden = self.config_.hidden;
  for (const Window* w : batch) {
    if (w->fields != m) throw ConfigError(fmt::format("window has {} fields, model expects {}", w->fields, m));
  }

  std::vector<Var> features;
  features.reserve(m);
  std::vector<int> rows(length * b_count);
  for (std::size_t f = 0; f < m; ++f) {
    for (std::size_t t = 0; t < length; ++t) {
      for (std::size_t b = 0; b < b_count; ++b) rows[t * b_count + b] = batch[b]->bucket(t, f);
    }
    features.push_back(lookup(tape, self.embeddings_.table(f), rows));
  }

  const Var a = alpha ? tape.parameter(*alpha) : tape.constant(row_of(self.genome_.alpha));
  const Var g = beta ? tape.parameter(*beta) : tape.constant(row_of(self.genome_.beta));
  const OperationVars ops{bind_tensor(tape, self.operations_.concat_projection),
                          bind_tensor(tape, self.operations_.kernel)};
  const Var x = build_input(tape, features, self.genome_, a, g, ops, self.frozen_ ? &self.active_ : nullptr);

  const LstmVars cell{bind_tensor(tape, self.lstm_.input_weights), bind_tensor(tape, self.lstm_.recurrent_weights),
                      bind_tensor(tape, self.lstm_.bias), hidden};
  const Var pre = tape.add_row(tape.matmul_nt(x, cell.input_weights), cell.bias);
  const Index bsz = static_cast<Index>(b_count);
  Var h = tape.constant(Matrix::Zero(bsz, hidden));
  Var c = tape.constant(Matrix::Zero(bsz, hidden));
  std::vector<Var> states;
  states.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    const Var gates =
        tape.add(tape.slice_rows(pre, static_cast<Index>(t) * bsz, bsz), tape.matmul_nt(h, cell.recurrent_weights));
    std::tie(h, c) = lstm_cell(tape, gates, c, hidden);
    states.push_back(h);
  }
  const Var all = states.size() == 1 ? states.front() : tape.concat_rows(states);
  return linear(tape, all, bind_tensor(tape, self.head_weight_), bind_tensor(tape, self.head_bias_));
}

Var Predictor::forward(Tape& tape, const Batch& batch, Tensor* alpha, Tensor* beta) {
  return forward_impl(*this, tape, batch, alpha, beta);
}

Var Predictor::forward(Tape& tape, const Batch& batch) const {
  return forward_impl(*this, tape, batch, nullptr, nullptr);
}

std::vector<double> predict(const Predictor& model, const Window& window) {
  Tape tape;
  const Var y = model.forward(tape, Batch{&window});
  const Matrix& v = tape.value(y);
  return {v.data(), v.data() + v.size()};
}

double loss_sim(std::span<const double> predicted, std::span<const double> simulated) {
  if (predicted.empty()) throw StateError("loss_sim: empty batch");
  if (predicted.size() != simulated.size()) {
    throw ConfigError(fmt::format("loss_sim: {} predictions for {} labels", predicted.size(), simulated.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double e = predicted[i] - simulated[i];
    sum += e * e;
  }
  return sum / static_cast<double>(predicted.size());
}

double loss_refine(std::span<const double> predicted, std::span<const double> observed,
                   std::span<const std::uint8_t> mask, std::span<const double> simulated, double rho) {
  if (predicted.empty()) throw StateError("loss_refine: empty batch");
  if (observed.size() != predicted.size() || mask.size() != predicted.size() || simulated.size() != predicted.size()) {
    throw ConfigError("loss_refine: predictions, observations, mask and simulated labels must align");
  }
  if (rho < 0.0) throw ConfigError(fmt::format("loss_refine: rho must be non-negative, got {}", rho));
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (mask[i]) {
      const double e = observed[i] - predicted[i];
      sum += e * e;
    } else {
      const double e = simulated[i] - predicted[i];
      sum += rho * e * e;
    }
  }
  return sum / static_cast<double>(predicted.size());
}

double train_step(Predictor& model, const Batch& batch, const LossSpec& loss) {
  if (loss.kind == LossKind::kRefine && loss.rho < 0.0) throw ConfigError("rho must be non-negative");
  const std::size_t length = window_length(batch);
  auto params = model.dense_parameters();
  for (Tensor* p : params) p->zero_grad();
  const bool relevance = !model.frozen();
  Genome& genome = model.genome();
  Tensor alpha(row_of(genome.alpha));
  Tensor beta(row_of(genome.beta));
  double value = 0.0;
  try {
    Tape tape;
    const Var y = model.forward(tape, batch, relevance ? &alpha : nullptr, relevance ? &beta : nullptr);
    const auto [target, weight] = targets(batch, loss);
    const Var l = tape.weighted_sq_error(y, target, weight, static_cast<double>(length * batch.size()));
    value = tape.scalar(l);
    if (!std::isfinite(value) || value > model.config().divergence_limit) {
      throw NumericalError(fmt::format("training diverged: loss {}", value));
    }
    tape.backward(l);
    auto& adam = model.adam_states();
    for (std::size_t i = 0; i < params.size(); ++i) adam_update(adam[i], *params[i]);
    if (relevance) {
      model.alpha_state().update({alpha.grad.data(), static_cast<std::size_t>(alpha.grad.size())}, genome.alpha);
      model.beta_state().update({beta.grad.data(), static_cast<std::size_t>(beta.grad.size())}, genome.beta);
    }
  } catch (const NumericalError& e) {
    throw NumericalError(fmt::format("model lineage {}: {}", model.lineage, e.what()));
  }
  return value;
}

double evaluate_loss(const Predictor& model, const Batch& batch, const LossSpec& loss) {
  const std::size_t length = window_length(batch);
  Tape tape;
  const Var y = model.forward(tape, batch);
  const auto [target, weight] = targets(batch, loss);
  return tape.scalar(tape.weighted_sq_error(y, target, weight, static_cast<double>(length * batch.size())));
}

double fitness(Predictor& model, std::span<const Batch> validation, Task task) {
  if (validation.empty()) throw StateError("fitness: no validation batches");
  double sum = 0.0;
  double count = 0.0;
  const LossSpec spec{LossKind::kSimulated, task, 0.0};
  for (const Batch& batch : validation) {
    const double n = static_cast<double>(window_length(batch) * batch.size());
    sum += evaluate_loss(model, batch, spec) * n;
    count += n;
  }
  const double value = sum / count;
  if (!std::isfinite(value)) throw NumericalError(fmt::format("model lineage {}: fitness is {}", model.lineage, value));
  model.fitness = value;
  return value;
}

std::vector<Batch> make_batches(std::span<const Window> windows, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<Batch> out;
  for (std::size_t i = 0; i < windows.size(); i += batch_size) {
    Batch b;
    for (std::size_t j = i; j < std::min(windows.size(), i + batch_size); ++j) b.push_back(&windows[j]);
    out.push_back(std::move(b));
  }
  return out;
}

Batch sample_batch(std::span<const Window> windows, std::size_t batch_size, Rng& rng) {
  if (windows.empty()) throw StateError("sample_batch: no windows");
  std::vector<std::size_t> all(windows.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> chosen;
  std::sample(all.begin(), all.end(), std::back_inserter(chosen), batch_size, rng);
  Batch b;
  for (std::size_t i : chosen) b.push_back(&windows[i]);
  return b;
}

Predictor refine(const Predictor& model, std::span<const Window> windows, Task task, const RefineConfig& config,
                 Rng& rng) {
  if (config.rho < 0.0) throw ConfigError(fmt::format("refine: rho must be non-negative, got {}", config.rho));
  std::size_t observed = 0;
  for (const Window& w : windows) {
    const auto& mask = w.mask(task);
    observed += static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  }
  if (observed == 0) {
    log::warn("refine: no observed {} labels; returning the model unchanged", task_name(task));
    return model;
  }
  Predictor out = model;
  out.freeze();
  const LossSpec spec{LossKind::kRefine, task, config.rho};
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
      Batch b;
      for (std::size_t j = i; j < std::min(order.size(), i + batch_size); ++j) b.push_back(&windows[order[j]]);
      train_step(out, b, spec);
    }
  }
  return out;
}

std::vector<double> predict_series(const Predictor& model, const LakeDataset& data, std::span<const int> encoded,
                                   std::size_t first, std::size_t last, std::size_t window) {
  const std::size_t days = data.days();
  last = std::min(last, days);
  if (first >= last) return {};
  if (window == 0 || window > days) {
    throw ConfigError(fmt::format("predict_series: window {} does not fit lake '{}' ({} days)", window, data.lake_id, days));
  }
  const std::size_t stride = std::max<std::size_t>(1, window / 2);
  const std::size_t warmup = window - stride;
  std::vector<std::size_t> starts;
  for (std::size_t s = first >= warmup ? first - warmup : 0;; s += stride) {
    const std::size_t clamped = std::min(s, days - window);
    if (starts.empty() || starts.back() != clamped) starts.push_back(clamped);
    if (clamped + window >= last) break;
  }
  std::vector<Window> windows;
  windows.reserve(starts.size());
  for (std::size_t s : starts) {
    auto one = make_windows(data, encoded, model.fields(), window, window, s, s + window);
    windows.push_back(std::move(one.front()));
  }
  std::vector<double> out(last - first, std::nan(""));
  std::vector<std::size_t> history(last - first, 0);
  std::vector<bool> seen(last - first, false);
  for (const Batch& batch : make_batches(windows, 16)) {
    Tape tape;
    const Matrix& y = tape.value(model.forward(tape, batch));
    const std::size_t b_count = batch.size();
    for (std::size_t b = 0; b < b_count; ++b) {
      const Window& w = *batch[b];
      for (std::size_t t = 0; t < window; ++t) {
        const std::size_t day = w.start + t;
        if (day < first || day >= last) continue;
        const std::size_t k = day - first;
        if (!seen[k] || t > history[k]) {
          seen[k] = true;
          history[k] = t;
          out[k] = y(static_cast<Index>(t * b_count + b), 0);
        }
      }
    }
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Predictor& model) {
  const Genome& g = model.genome_;
  const ModelConfig& c = model.config_;
  std::string out = fmt::format("{} {}\n", kCheckpointMagic, kCheckpointVersion);
  out += fmt::format("schema_hash {}\nfields {}\nembed_dim {}\nhidden {}\n", model.schema_hash_, g.fields, c.embed_dim,
                     c.hidden);
  out += fmt::format("adam {} {} {} {}\n", csv::format_double(c.adam.lr), csv::format_double(c.adam.beta1),
                     csv::format_double(c.adam.beta2), csv::format_double(c.adam.eps));
  out += fmt::format("grda_alpha {} {} {}\n", csv::format_double(c.grda_alpha.lr), csv::format_double(c.grda_alpha.c),
                     csv::format_double(c.grda_alpha.mu));
  out += fmt::format("grda_beta {} {} {}\n", csv::format_double(c.grda_beta.lr), csv::format_double(c.grda_beta.c),
                     csv::format_double(c.grda_beta.mu));
  out += fmt::format("divergence_limit {}\nlineage {}\n", csv::format_double(c.divergence_limit), model.lineage);
  out += fmt::format("fitness {}\nfrozen {}\n", model.fitness ? csv::format_double(*model.fitness) : "none",
                     model.frozen_ ? 1 : 0);
  write_list(out, "ops", g.ops);
  write_list(out, "alpha", g.alpha);
  write_list(out, "beta", g.beta);
  for (const auto& [key, state] : {std::pair{"alpha_state", &model.alpha_state_}, {"beta_state", &model.beta_state_}}) {
    out += key;
    for (std::size_t i = 0; i < state->size(); ++i) {
      out += fmt::format(" {} {}", csv::format_double(state->accumulator(i)), state->step(i));
    }
    out += '\n';
  }
  const auto names = dense_names(g.fields);
  const auto params = model.dense_parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    out += fmt::format("tensor {} {} {}", names[i], params[i]->rows(), params[i]->cols());
    write_values(out, params[i]->value);
    out += '\n';
    const AdamState& a = model.adam_[i];
    out += fmt::format("adam_state {} {}", names[i], a.step);
    write_values(out, a.first_moment);
    write_values(out, a.second_moment);
    out += '\n';
  }
  out += "end\n";
  csv::write_text(path, out);
}

Predictor load_checkpoint(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream file(path);
  if (!file) throw DataError(fmt::format("cannot open checkpoint '{}'", path.string()));
  TokenReader in(file, path.string());
  in.expect(kCheckpointMagic);
  const long version = in.integer();
  if (version != kCheckpointVersion) throw DataError(fmt::format("{}: unsupported checkpoint version {}", in.source(), version));
  in.expect("schema_hash");
  const std::uint64_t hash = in.unsigned64();
  if (hash != schema.hash()) {
    throw DataError(fmt::format("{}: schema hash {} does not match the current schema ({})", in.source(), hash,
                                schema.hash()));
  }
  Predictor p;
  p.schema_hash_ = hash;
  in.expect("fields");
  const long m = in.integer();
  if (m != static_cast<long>(schema.size())) throw DataError(fmt::format("{}: field count {} differs from schema", in.source(), m));
  ModelConfig& c = p.config_;
  in.expect("embed_dim");
  c.embed_dim = in.integer();
  in.expect("hidden");
  c.hidden = in.integer();
  if (c.embed_dim <= 0 || c.hidden <= 0) throw DataError(fmt::format("{}: bad model sizes", in.source()));
  in.expect("adam");
  c.adam = {in.number(), in.number(), in.number(), in.number()};
  in.expect("grda_alpha");
  c.grda_alpha = {in.number(), in.number(), in.number()};
  in.expect("grda_beta");
  c.grda_beta = {in.number(), in.number(), in.number()};
  in.expect("divergence_limit");
  c.divergence_limit = in.number();
  in.expect("lineage");
  p.lineage = in.unsigned64();
  in.expect("fitness");
  if (const std::string f = in.word(); f != "none") {
    double v = 0.0;
    if (!csv::parse_double(f, v)) throw DataError(fmt::format("{}: bad fitness '{}'", in.source(), f));
    p.fitness = v;
  }
  in.expect("frozen");
  const bool frozen = in.integer() != 0;

  Genome& g = p.genome_;
  g.fields = static_cast<std::size_t>(m);
  const std::size_t pairs = pair_count(g.fields);
  in.expect("ops");
  for (std::size_t k = 0; k < pairs; ++k) g.ops.push_back(op_from_int(static_cast<int>(in.integer())));
  in.expect("alpha");
  for (long i = 0; i < m; ++i) g.alpha.push_back(in.number());
  in.expect("beta");
  for (std::size_t k = 0; k < pairs; ++k) g.beta.push_back(in.number());
  g.check();
  p.alpha_state_ = GrdaState(g.fields, 0.0, c.grda_alpha);
  p.beta_state_ = GrdaState(pairs, 0.0, c.grda_beta);
  for (auto [key, state] : {std::pair{"alpha_state", &p.alpha_state_}, {"beta_state", &p.beta_state_}}) {
    in.expect(key);
    for (std::size_t i = 0; i < state->size(); ++i) {
      const double acc = in.number();
      state->restore(i, acc, in.integer());
    }
  }

  p.embeddings_ = EmbeddingTable(schema, c.embed_dim);
  p.operations_ = OperationParams{Tensor(c.embed_dim, 2 * c.embed_dim), Tensor(c.embed_dim, c.embed_dim)};
  p.lstm_ = LstmParams::zeros(p.input_size(), c.hidden);
  p.head_weight_ = Tensor(1, c.hidden);
  p.head_bias_ = Tensor(1, 1);
  const auto names = dense_names(g.fields);
  const auto params = p.dense_parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    in.expect("tensor");
    in.expect(names[i]);
    const long rows = in.integer();
    const long cols = in.integer();
    if (rows != params[i]->rows() || cols != params[i]->cols()) {
      throw DataError(fmt::format("{}: tensor {} is {}x{}, expected {}x{}", in.source(), names[i], rows, cols,
                                  params[i]->rows(), params[i]->cols()));
    }
    in.matrix(params[i]->value);
    AdamState a(*params[i], c.adam);
    in.expect("adam_state");
    in.expect(names[i]);
    a.step = in.integer();
    in.matrix(a.first_moment);
    in.matrix(a.second_moment);
    p.adam_.push_back(std::move(a));
  }
  in.expect("end");
  if (frozen) p.freeze();
  return p;
}

}  // namespace mces
