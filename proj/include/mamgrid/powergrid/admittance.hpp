#pragma once

#include <complex>

#include <Eigen/Dense>

#include "mamgrid/powergrid/case.hpp"

namespace mamgrid::powergrid {

using Complex = std::complex<double>;

/// Bus admittance Y = G + jB in p.u., dense and indexed by bus position in
/// GridCase::buses.
struct AdmittanceMatrix {
  Eigen::MatrixXd g;
  Eigen::MatrixXd b;

  Eigen::Index size() const { return g.rows(); }
  Eigen::MatrixXcd complex() const;
};

/// Two-port admittances of one branch (pi model with an ideal phase-shifting
/// transformer on the from side).
struct BranchAdmittance {
  Complex ff;
  Complex ft;
  Complex tf;
  Complex tt;
};

/// Throws CaseError when the series impedance is zero.
BranchAdmittance branch_admittance(const Line& line);

AdmittanceMatrix build_admittance(const GridCase& grid);

}  // namespace mamgrid::powergrid
