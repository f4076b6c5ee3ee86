#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace onpalm {
namespace scenario {

struct TrayParams {
  double mass{1.0};
  double radius{0.228};
  double thickness{0.004};
  /// Rim-inclusive height; the collision cylinder is this tall, centered on
  /// the tray position.
  double height{0.022};

  /// Body-frame inertia of a uniform solid cylinder of the collision height.
  Eigen::Matrix3d Inertia() const;
};

struct EndEffectorParams {
  double mass{0.37};
  double radius{0.0725};
  double thickness{0.01};
  int num_contacts{3};
  /// Contact points sit on a circle of this fraction of the radius.
  double contact_circle_fraction{0.9};
};

/// Top edge of a support rail; the tray rests on it.
struct SupportSegment {
  Eigen::Vector3d start;
  Eigen::Vector3d end;
};

/// Axis-aligned box. The tray touches the face that looks toward it.
struct WallParams {
  Eigen::Vector3d center;
  Eigen::Vector3d half_extents;
};

struct FrictionPair {
  double tray_ee{0.0};
  double tray_env{0.0};
};

enum class FrictionSource { kModel, kMeasured };

struct ScenarioConfig {
  TrayParams tray;
  EndEffectorParams ee;
  std::vector<SupportSegment> supports;
  std::optional<WallParams> wall;
  /// Coefficients used inside the MPC model.
  FrictionPair model_mu{0.6, 0.1};
  /// Coefficients used by the ground-truth simulator.
  FrictionPair measured_mu{0.5, 0.18};
  double gravity{9.81};
  double contact_sphere_radius{0.0};

  /// ee points, then two points per support segment, then one wall point.
  int num_contacts() const;
  int num_lambdas() const { return 4 * num_contacts(); }
  double Mu(bool ee_contact, FrictionSource src) const;

  static ScenarioConfig TrayRetrieval();
  static ScenarioConfig WallRotation();
};

/// Empty when valid; otherwise one message per problem.
std::vector<std::string> Validate(const ScenarioConfig& cfg);

/// Height of the support rail tops that makes a level tray centered at
/// `tray_z` rest flush.
double FlushSupportHeight(const TrayParams& tray, double tray_z);

}  // namespace scenario
}  // namespace onpalm
