#pragma once

#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

#include "cpmartingale/classical.hpp"
#include "cpmartingale/martingale.hpp"
#include "cpmartingale/oracle.hpp"

namespace cpm {

/// Uniform sequential interface: consume one observation, return the
/// current alarm statistic.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual double step(std::span<const double> obs) = 0;
};

struct DetectorSpec {
  enum class Family { icm, full_cm, cusum, sr, pp, oracle_cusum, oracle_sr, oracle_pp };

  Family family = Family::icm;
  NcmConfig ncm;
  BettingSpec betting;
  GaussianShiftModel model;  // cusum / sr / pp
  double geom_p = 0.01;      // pp and oracle-pp

  bool uses_training() const { return family == Family::icm; }
  bool uses_betting() const { return family == Family::icm || family == Family::full_cm; }
};

inline std::string detector_family_name(DetectorSpec::Family f) {
  switch (f) {
    case DetectorSpec::Family::icm: return "icm";
    case DetectorSpec::Family::full_cm: return "full-cm";
    case DetectorSpec::Family::cusum: return "cusum";
    case DetectorSpec::Family::sr: return "sr";
    case DetectorSpec::Family::pp: return "pp";
    case DetectorSpec::Family::oracle_cusum: return "oracle-cusum";
    case DetectorSpec::Family::oracle_sr: return "oracle-sr";
    case DetectorSpec::Family::oracle_pp: return "oracle-pp";
  }
  return "?";
}

namespace detail {

class IcmAdapter final : public Detector {
 public:
  IcmAdapter(IcmDetector det) : det_(std::move(det)) {}
  double step(std::span<const double> obs) override { return det_.step(obs); }
  IcmDetector& inner() { return det_; }

 private:
  IcmDetector det_;
};

class FullCmAdapter final : public Detector {
 public:
  FullCmAdapter(FullCmDetector det) : det_(std::move(det)) {}
  double step(std::span<const double> obs) override { return det_.step(obs); }

 private:
  FullCmDetector det_;
};

template <class Inner>
class ScalarAdapter final : public Detector {
 public:
  explicit ScalarAdapter(Inner det) : det_(std::move(det)) {}
  double step(std::span<const double> obs) override {
    if (obs.size() != 1)
      throw std::invalid_argument("detector: 1-D observations required");
    return det_.step(obs[0]);
  }

 private:
  Inner det_;
};

}  // namespace detail

/// Builds a per-stream detector instance. ICM takes ownership of the
/// training set; the rng powers tie breaking (and nothing else) for the
/// conformal detectors.
inline std::unique_ptr<Detector> make_detector(const DetectorSpec& spec,
                                               std::optional<TrainingSet> training,
                                               RngHandle rng) {
  using Family = DetectorSpec::Family;
  switch (spec.family) {
    case Family::icm: {
      if (!training) throw std::invalid_argument("make_detector: icm requires a training set");
      return std::make_unique<detail::IcmAdapter>(IcmDetector(
          make_ncm(spec.ncm, std::move(*training)), make_betting(spec.betting), std::move(rng)));
    }
    case Family::full_cm:
      return std::make_unique<detail::FullCmAdapter>(
          FullCmDetector(make_betting(spec.betting), std::move(rng)));
    case Family::cusum:
      return std::make_unique<detail::ScalarAdapter<CusumDetector>>(CusumDetector(spec.model));
    case Family::sr:
      return std::make_unique<detail::ScalarAdapter<SrDetector>>(SrDetector(spec.model));
    case Family::pp:
      return std::make_unique<detail::ScalarAdapter<PpDetector>>(
          PpDetector(spec.model, spec.geom_p));
    case Family::oracle_cusum:
      return std::make_unique<detail::ScalarAdapter<OracleDetector>>(
          OracleDetector(OracleKind::cusum, spec.geom_p));
    case Family::oracle_sr:
      return std::make_unique<detail::ScalarAdapter<OracleDetector>>(
          OracleDetector(OracleKind::sr, spec.geom_p));
    case Family::oracle_pp:
      return std::make_unique<detail::ScalarAdapter<OracleDetector>>(
          OracleDetector(OracleKind::pp, spec.geom_p));
  }
  throw std::invalid_argument("make_detector: unknown detector family");
}

}  // namespace cpm
