#include "mamgrid/powergrid/admittance.hpp"

#include <numbers>

namespace mamgrid::powergrid {

Eigen::MatrixXcd AdmittanceMatrix::complex() const {
  Eigen::MatrixXcd y(g.rows(), g.cols());
  y.real() = g;
  y.imag() = b;
  return y;
}

BranchAdmittance branch_admittance(const Line& line) {
  const Complex z(line.r, line.x);
  if (z == Complex(0.0, 0.0)) {
    throw CaseError("lines[id=" + std::to_string(line.id) + "]: zero series impedance");
  }
  const Complex ys = 1.0 / z;
  const Complex charging(0.0, line.b / 2.0);
  const double shift = line.shift_deg * std::numbers::pi / 180.0;
  const Complex ratio = std::polar(line.tap, shift);

  BranchAdmittance y;
  y.tt = ys + charging;
  y.ff = y.tt / (line.tap * line.tap);
  y.ft = -ys / std::conj(ratio);
  y.tf = -ys / ratio;
  return y;
}

AdmittanceMatrix build_admittance(const GridCase& grid) {
  const auto n = static_cast<Eigen::Index>(grid.buses.size());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const Line& line : grid.lines) {
    const BranchAdmittance a = branch_admittance(line);
    const auto f = static_cast<Eigen::Index>(grid.bus_index(line.from_bus));
    const auto t = static_cast<Eigen::Index>(grid.bus_index(line.to_bus));
    y(f, f) += a.ff;
    y(f, t) += a.ft;
    y(t, f) += a.tf;
    y(t, t) += a.tt;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const Bus& bus = grid.buses[static_cast<std::size_t>(i)];
    y(i, i) += Complex(bus.gs_mw, bus.bs_mvar) / grid.base_mva;
  }
  return AdmittanceMatrix{y.real(), y.imag()};
}

}  // namespace mamgrid::powergrid
