#include "onpalm/scenario/scenario_config.h"

#include <sstream>

namespace onpalm {
namespace scenario {

Eigen::Matrix3d TrayParams::Inertia() const {
  const double r2 = radius * radius;
  const double h2 = height * height;
  Eigen::Matrix3d I = Eigen::Matrix3d::Zero();
  I(0, 0) = I(1, 1) = mass * (3.0 * r2 + h2) / 12.0;
  I(2, 2) = 0.5 * mass * r2;
  return I;
}

int ScenarioConfig::num_contacts() const {
  return ee.num_contacts + 2 * static_cast<int>(supports.size()) + (wall ? 1 : 0);
}

double ScenarioConfig::Mu(bool ee_contact, FrictionSource src) const {
  const FrictionPair& p = src == FrictionSource::kModel ? model_mu : measured_mu;
  return ee_contact ? p.tray_ee : p.tray_env;
}

double FlushSupportHeight(const TrayParams& tray, double tray_z) {
  return tray_z - 0.5 * tray.height;
}

ScenarioConfig ScenarioConfig::TrayRetrieval() {
  ScenarioConfig cfg;
  const double top = FlushSupportHeight(cfg.tray, 0.485);
  cfg.supports.push_back({{0.55, 0.19, top}, {0.95, 0.19, top}});
  cfg.supports.push_back({{0.55, -0.19, top}, {0.95, -0.19, top}});
  return cfg;
}

ScenarioConfig ScenarioConfig::WallRotation() {
  ScenarioConfig cfg;
  cfg.model_mu = {0.8, 1.0};
  cfg.measured_mu = {0.5, 1.0};
  cfg.wall = WallParams{{0.55, 0.30, 0.5}, {0.3, 0.02, 0.1}};
  return cfg;
}

std::vector<std::string> Validate(const ScenarioConfig& cfg) {
  std::vector<std::string> out;
  auto positive = [&out](const char* name, double v) {
    if (!(v > 0.0)) {
      std::ostringstream os;
      os << name << " must be positive, got " << v;
      out.push_back(os.str());
    }
  };
  positive("tray.mass", cfg.tray.mass);
  positive("tray.radius", cfg.tray.radius);
  positive("tray.thickness", cfg.tray.thickness);
  positive("tray.height", cfg.tray.height);
  positive("end_effector.mass", cfg.ee.mass);
  positive("end_effector.radius", cfg.ee.radius);
  positive("end_effector.thickness", cfg.ee.thickness);
  positive("gravity", cfg.gravity);
  if (cfg.ee.num_contacts < 1) out.push_back("end_effector.num_contacts must be >= 1");
  if (cfg.ee.contact_circle_fraction < 0.0 || cfg.ee.contact_circle_fraction > 1.0) {
    out.push_back("end_effector.contact_circle_fraction must lie in [0, 1]");
  }
  if (cfg.contact_sphere_radius < 0.0) out.push_back("contact_sphere_radius must be >= 0");
  for (const auto& [name, mu] :
       {std::pair{"model_mu.tray_ee", cfg.model_mu.tray_ee},
        std::pair{"model_mu.tray_env", cfg.model_mu.tray_env},
        std::pair{"measured_mu.tray_ee", cfg.measured_mu.tray_ee},
        std::pair{"measured_mu.tray_env", cfg.measured_mu.tray_env}}) {
    if (mu < 0.0 || mu > 2.0) {
      std::ostringstream os;
      os << name << " must lie in [0, 2], got " << mu;
      out.push_back(os.str());
    }
  }
  for (size_t i = 0; i < cfg.supports.size(); ++i) {
    if ((cfg.supports[i].end - cfg.supports[i].start).norm() <= 0.0) {
      out.push_back("support " + std::to_string(i) + " has zero length");
    }
  }
  if (cfg.wall && (cfg.wall->half_extents.array() <= 0.0).any()) {
    out.push_back("wall half extents must be positive");
  }
  return out;
}

}  // namespace scenario
}  // namespace onpalm
