#include "lspkit/detector.hpp"

#include "lspkit/error.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace lspkit {

namespace {

constexpr double kRidgeLambda = 1e-8;
constexpr double kResidualFloor = 1e-9;

Eigen::MatrixXd without_column(const Eigen::MatrixXd& m, Eigen::Index skip) {
  Eigen::MatrixXd out(m.rows(), m.cols() - 1);
  for (Eigen::Index c = 0, k = 0; c < m.cols(); ++c)
    if (c != skip) out.col(k++) = m.col(c);
  return out;
}

double predict(const SensorRegression& reg, std::span<const double> y, std::size_t s) {
  double acc = reg.bias;
  for (std::size_t c = 0, k = 0; c < y.size(); ++c)
    if (c != s) acc += reg.weights[k++] * y[c];
  return acc;
}

std::vector<double> max_residuals(const DetectorModel& d, const MeasurementSeries& m) {
  std::vector<double> worst(d.num_sensors(), 0.0);
  std::vector<double> row(d.num_sensors());
  for (std::size_t t = 0; t < m.num_steps(); ++t) {
    for (std::size_t s = 0; s < row.size(); ++s) row[s] = m.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s));
    auto r = residuals(d, row);
    for (std::size_t s = 0; s < row.size(); ++s) worst[s] = std::max(worst[s], r[s]);
  }
  return worst;
}

} // namespace

std::string to_string(AlarmRule rule) {
  return rule == AlarmRule::WeightedSum ? "weighted_sum" : "max_threshold";
}

AlarmRule alarm_rule_from_string(const std::string& name) {
  if (name == "weighted_sum") return AlarmRule::WeightedSum;
  if (name == "max_threshold") return AlarmRule::MaxThreshold;
  throw Error("BAD_CONFIG", "unknown detector rule '" + name + "' (weighted_sum | max_threshold)");
}

TrainResult train_detector(const MeasurementSeries& train, const std::optional<MeasurementSeries>& validation,
                           const TrainOptions& options) {
  const std::size_t sensors = train.num_sensors();
  if (sensors == 0) throw Error("BAD_CONFIG", "detector needs at least one sensor");
  if (train.num_steps() < sensors + 1)
    throw Error("BAD_CONFIG", "training data needs at least S + 1 rows");
  if (options.rule == AlarmRule::WeightedSum) {
    if (!validation) throw Error("BAD_CONFIG", "the weighted-sum rule is calibrated on validation data");
    if (validation->sensors != train.sensors) throw Error("DIM_MISMATCH", "validation sensors differ from training");
    if (!(options.gamma > 1.0)) throw Error("BAD_CONFIG", "gamma must exceed 1");
  } else if (!(options.threshold_factor > 0.0)) {
    throw Error("BAD_CONFIG", "threshold factor must be positive");
  }

  TrainResult result;
  auto& d = result.model;
  d.sensors = train.sensors;
  d.rule = options.rule;
  d.gamma = options.gamma;
  d.threshold_factor = options.threshold_factor;
  d.info = {train.num_steps(), validation ? validation->num_steps() : 0, options.seed};

  const Eigen::MatrixXd& y = train.values;
  const Eigen::RowVectorXd mean = y.colwise().mean();
  for (std::size_t s = 0; s < sensors; ++s) {
    const auto col = static_cast<Eigen::Index>(s);
    SensorRegression reg;
    if (sensors == 1) {
      reg.bias = mean[0];
      d.regressions.push_back(reg);
      continue;
    }
    const Eigen::MatrixXd x = without_column(y.rowwise() - mean, col);
    const Eigen::VectorXd target = y.col(col).array() - mean[col];
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    Eigen::VectorXd w;
    if (qr.rank() < x.cols()) {
      result.warnings.push_back({"RANK_DEFICIENT",
                                 "regression for sensor '" + d.sensors[s] + "' is rank deficient; ridge fallback",
                                 "sensor '" + d.sensors[s] + "'", 0});
      const Eigen::MatrixXd gram =
          x.transpose() * x + kRidgeLambda * Eigen::MatrixXd::Identity(x.cols(), x.cols());
      w = gram.ldlt().solve(x.transpose() * target);
    } else {
      w = qr.solve(target);
    }
    const Eigen::RowVectorXd others = without_column(mean, col);
    reg.weights.assign(w.data(), w.data() + w.size());
    reg.bias = mean[col] - others.dot(w.transpose());
    d.regressions.push_back(std::move(reg));
  }

  const auto& calibration = options.rule == AlarmRule::WeightedSum ? *validation : train;
  auto worst = max_residuals(d, calibration);
  for (std::size_t s = 0; s < sensors; ++s) {
    if (worst[s] <= 0.0) {
      result.warnings.push_back({"ZERO_RESIDUAL",
                                 "sensor '" + d.sensors[s] + "' has zero calibration residual; floor applied",
                                 "sensor '" + d.sensors[s] + "'", 0});
      worst[s] = kResidualFloor;
    }
  }
  if (options.rule == AlarmRule::WeightedSum) {
    for (double w : worst) d.residual_weights.push_back(1.0 / (static_cast<double>(sensors) * options.gamma * w));
  } else {
    for (double w : worst) d.thresholds.push_back(options.threshold_factor * w);
  }
  return result;
}

std::vector<double> residuals(const DetectorModel& detector, std::span<const double> pressures) {
  if (pressures.size() != detector.num_sensors())
    throw Error("DIM_MISMATCH", "expected " + std::to_string(detector.num_sensors()) + " pressures, got " +
                                    std::to_string(pressures.size()));
  std::vector<double> r(pressures.size());
  for (std::size_t s = 0; s < r.size(); ++s)
    r[s] = std::abs(predict(detector.regressions[s], pressures, s) - pressures[s]);
  return r;
}

bool alarm_from_residuals(const DetectorModel& detector, std::span<const double> residual) {
  if (residual.size() != detector.num_sensors()) throw Error("DIM_MISMATCH", "residual length mismatch");
  if (detector.rule == AlarmRule::WeightedSum) {
    double score = 0.0;
    for (std::size_t s = 0; s < residual.size(); ++s) score += detector.residual_weights[s] * residual[s];
    return score > 1.0;
  }
  for (std::size_t s = 0; s < residual.size(); ++s)
    if (residual[s] > detector.thresholds[s]) return true;
  return false;
}

bool detect(const DetectorModel& detector, std::span<const double> pressures) {
  return alarm_from_residuals(detector, residuals(detector, pressures));
}

bool detect(const DetectorModel& detector, const Eigen::VectorXd& pressures) {
  return detect(detector, std::span<const double>(pressures.data(), static_cast<std::size_t>(pressures.size())));
}

bool detect_window(const DetectorModel& detector, const MeasurementSeries& series, std::size_t start_step,
                   std::size_t window) {
  if (start_step + window >= series.num_steps())
    throw Error("RANGE", "detection window [" + std::to_string(start_step) + ", " +
                             std::to_string(start_step + window) + "] exceeds the series");
  for (std::size_t t = start_step; t <= start_step + window; ++t) {
    const Eigen::VectorXd row = series.values.row(static_cast<Eigen::Index>(t)).transpose();
    if (detect(detector, row)) return true;
  }
  return false;
}

std::size_t count_alarms(const DetectorModel& detector, const MeasurementSeries& series) {
  std::size_t alarms = 0;
  for (std::size_t t = 0; t < series.num_steps(); ++t) {
    const Eigen::VectorXd row = series.values.row(static_cast<Eigen::Index>(t)).transpose();
    alarms += detect(detector, row) ? 1 : 0;
  }
  return alarms;
}

std::string detector_to_json(const DetectorModel& d) {
  nlohmann::json regs = nlohmann::json::array();
  for (std::size_t s = 0; s < d.regressions.size(); ++s)
    regs.push_back({{"sensor", d.sensors[s]}, {"weights", d.regressions[s].weights}, {"bias", d.regressions[s].bias}});
  nlohmann::json doc = {
      {"sensors", d.sensors},
      {"regressions", regs},
      {"rule", to_string(d.rule)},
      {"params", {{"gamma", d.gamma}, {"threshold_factor", d.threshold_factor}}},
      {"training", {{"train_rows", d.info.train_rows}, {"validation_rows", d.info.validation_rows}, {"seed", d.info.seed}}},
  };
  if (d.rule == AlarmRule::WeightedSum) doc["residual_weights"] = d.residual_weights;
  else doc["thresholds"] = d.thresholds;
  return doc.dump(2) + "\n";
}

DetectorModel detector_from_json(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    DetectorModel d;
    d.sensors = doc.at("sensors").get<std::vector<std::string>>();
    for (const auto& reg : doc.at("regressions"))
      d.regressions.push_back({reg.at("weights").get<std::vector<double>>(), reg.at("bias").get<double>()});
    d.rule = alarm_rule_from_string(doc.at("rule").get<std::string>());
    d.gamma = doc.at("params").at("gamma").get<double>();
    d.threshold_factor = doc.at("params").at("threshold_factor").get<double>();
    const auto& info = doc.at("training");
    d.info = {info.at("train_rows").get<std::size_t>(), info.at("validation_rows").get<std::size_t>(),
              info.at("seed").get<std::uint64_t>()};
    if (d.rule == AlarmRule::WeightedSum) d.residual_weights = doc.at("residual_weights").get<std::vector<double>>();
    else d.thresholds = doc.at("thresholds").get<std::vector<double>>();

    const auto s = d.sensors.size();
    bool ok = d.regressions.size() == s;
    for (const auto& reg : d.regressions) ok = ok && reg.weights.size() + 1 == s;
    if (d.rule == AlarmRule::WeightedSum)
      ok = ok && d.residual_weights.size() == s &&
           std::all_of(d.residual_weights.begin(), d.residual_weights.end(), [](double q) { return q > 0; });
    else
      ok = ok && d.thresholds.size() == s &&
           std::all_of(d.thresholds.begin(), d.thresholds.end(), [](double t) { return t > 0; });
    if (!ok) throw Error("BAD_DETECTOR", "detector file is inconsistent");
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error("BAD_DETECTOR", std::string("cannot read detector JSON: ") + e.what());
  }
}

} // namespace lspkit
