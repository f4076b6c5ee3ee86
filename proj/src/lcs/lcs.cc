#include "onpalm/lcs/lcs.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace onpalm {
namespace lcs {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

Lcs::Lcs(int n_x, int n_u, int n_lambda, double dt_in)
    : A(MatrixXd::Zero(n_x, n_x)),
      B(MatrixXd::Zero(n_x, n_u)),
      D(MatrixXd::Zero(n_x, n_lambda)),
      d(VectorXd::Zero(n_x)),
      E(MatrixXd::Zero(n_lambda, n_x)),
      F(MatrixXd::Zero(n_lambda, n_lambda)),
      H(MatrixXd::Zero(n_lambda, n_u)),
      c(VectorXd::Zero(n_lambda)),
      dt(dt_in) {}

VectorXd Lcs::Slack(const VectorXd& x, const VectorXd& u, const VectorXd& lambda) const {
  return E * x + F * lambda + H * u + c;
}

VectorXd Lcs::Dynamics(const VectorXd& x, const VectorXd& u, const VectorXd& lambda) const {
  return A * x + B * u + D * lambda + d;
}

std::vector<std::string> Validate(const Lcs& m) {
  std::vector<std::string> out;
  const int nx = static_cast<int>(m.A.rows());
  const int nu = static_cast<int>(m.B.cols());
  const int nl = static_cast<int>(m.F.rows());
  auto check = [&out](const char* name, long rows, long cols, long er, long ec) {
    if (rows != er || cols != ec) {
      std::ostringstream os;
      os << name << " is " << rows << "x" << cols << ", expected " << er << "x" << ec;
      out.push_back(os.str());
    }
  };
  check("A", m.A.rows(), m.A.cols(), nx, nx);
  check("B", m.B.rows(), m.B.cols(), nx, nu);
  check("D", m.D.rows(), m.D.cols(), nx, nl);
  check("d", m.d.size(), 1, nx, 1);
  check("E", m.E.rows(), m.E.cols(), nl, nx);
  check("F", m.F.rows(), m.F.cols(), nl, nl);
  check("H", m.H.rows(), m.H.cols(), nl, nu);
  check("c", m.c.size(), 1, nl, 1);
  auto finite = [&out](const char* name, const auto& mat) {
    if (!mat.allFinite()) out.push_back(std::string(name) + " has non-finite entries");
  };
  finite("A", m.A);
  finite("B", m.B);
  finite("D", m.D);
  finite("d", m.d);
  finite("E", m.E);
  finite("F", m.F);
  finite("H", m.H);
  finite("c", m.c);
  if (!(m.dt > 0.0) || !std::isfinite(m.dt)) {
    std::ostringstream os;
    os << "dt must be positive, got " << m.dt;
    out.push_back(os.str());
  }
  if (m.F.rows() == m.F.cols()) {
    for (int i = 0; i < nl; ++i) {
      if (m.F(i, i) < 0.0) {
        std::ostringstream os;
        os << "F has negative diagonal entry at " << i;
        out.push_back(os.str());
        break;
      }
    }
  }
  return out;
}

StepResult Step(const Lcs& m, const VectorXd& x, const VectorXd& u, numopt::LcpMethod method,
                const VectorXd* lambda_warm) {
  if (x.size() != m.num_states() || u.size() != m.num_inputs()) {
    throw std::invalid_argument("lcs step: state or input size mismatch");
  }
  StepResult out;
  if (m.num_lambdas() == 0) {
    out.lambda = VectorXd::Zero(0);
    out.status = numopt::LcpStatus::kSolved;
  } else {
    const numopt::LinCompProblem lcp{m.F, m.E * x + m.H * u + m.c};
    const numopt::LcpResult r = numopt::SolveLcp(lcp, method, {}, lambda_warm);
    out.lambda = r.lambda;
    out.status = r.status;
    out.lcp_residual = r.residual;
  }
  out.x_next = m.Dynamics(x, u, out.lambda);
  return out;
}

double ComplementarityResidual(const Lcs& m, const VectorXd& x, const VectorXd& u,
                               const VectorXd& lambda, const VectorXd& x_next) {
  double r = (x_next - m.Dynamics(x, u, lambda)).cwiseAbs().maxCoeff();
  if (m.num_lambdas() > 0) {
    const VectorXd s = m.Slack(x, u, lambda);
    r = std::max({r, -lambda.minCoeff(), -s.minCoeff(), std::abs(lambda.dot(s))});
  }
  return std::max(r, 0.0);
}

namespace {

json MatrixJson(const MatrixXd& M) {
  json j;
  j["rows"] = M.rows();
  j["cols"] = M.cols();
  std::vector<double> data;
  data.reserve(M.size());
  for (int i = 0; i < M.rows(); ++i) {
    for (int k = 0; k < M.cols(); ++k) data.push_back(M(i, k));
  }
  j["data"] = data;
  return j;
}

MatrixXd MatrixFromJson(const json& j, const char* name) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    throw std::invalid_argument(std::string("lcs json: matrix ") + name + " malformed");
  }
  const int rows = j["rows"].get<int>();
  const int cols = j["cols"].get<int>();
  const std::vector<double> data = j["data"].get<std::vector<double>>();
  if (static_cast<long>(data.size()) != static_cast<long>(rows) * cols) {
    throw std::invalid_argument(std::string("lcs json: matrix ") + name +
                                " data length does not match rows*cols");
  }
  MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int k = 0; k < cols; ++k) M(i, k) = data[static_cast<size_t>(i) * cols + k];
  }
  return M;
}

json VectorJson(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd VectorFromJson(const json& j, const char* name) {
  if (!j.is_array()) {
    throw std::invalid_argument(std::string("lcs json: vector ") + name + " malformed");
  }
  const std::vector<double> data = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(data.data(), static_cast<long>(data.size()));
}

}  // namespace

std::string ToJson(const Lcs& m) {
  json j;
  j["n_x"] = m.num_states();
  j["n_u"] = m.num_inputs();
  j["n_lambda"] = m.num_lambdas();
  j["dt"] = m.dt;
  j["A"] = MatrixJson(m.A);
  j["B"] = MatrixJson(m.B);
  j["D"] = MatrixJson(m.D);
  j["d"] = VectorJson(m.d);
  j["E"] = MatrixJson(m.E);
  j["F"] = MatrixJson(m.F);
  j["H"] = MatrixJson(m.H);
  j["c"] = VectorJson(m.c);
  return j.dump();
}

Lcs LcsFromJson(const std::string& text) {
  const json j = json::parse(text);
  Lcs m;
  m.dt = j.at("dt").get<double>();
  m.A = MatrixFromJson(j.at("A"), "A");
  m.B = MatrixFromJson(j.at("B"), "B");
  m.D = MatrixFromJson(j.at("D"), "D");
  m.d = VectorFromJson(j.at("d"), "d");
  m.E = MatrixFromJson(j.at("E"), "E");
  m.F = MatrixFromJson(j.at("F"), "F");
  m.H = MatrixFromJson(j.at("H"), "H");
  m.c = VectorFromJson(j.at("c"), "c");
  if (j.at("n_x").get<int>() != m.num_states() || j.at("n_u").get<int>() != m.num_inputs() ||
      j.at("n_lambda").get<int>() != m.num_lambdas()) {
    throw std::invalid_argument("lcs json: declared dimensions disagree with matrices");
  }
  return m;
}

std::string StateToJson(const VectorXd& x) {
  json j;
  j["x"] = VectorJson(x);
  return j.dump();
}

VectorXd StateFromJson(const std::string& text) {
  const json j = json::parse(text);
  return VectorFromJson(j.at("x"), "x");
}

}  // namespace lcs
}  // namespace onpalm
