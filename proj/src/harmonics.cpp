#include "capsense/harmonics.hpp"

#include <cmath>
#include <string>

namespace capsense {

namespace {
constexpr int key(int l, int m) { return l * 16 + (m + 8); }
}  // namespace

double solid_harmonic(int l, int m, const Vec3& v) {
  const double x = v[0], y = v[1], z = v[2];
  double p = 0.0;
  switch (key(l, m)) {
    case key(0,0): p = 0.28209479177387814; break;
    case key(1,-1): p = 0.48860251190291992*y; break;
    case key(1,0): p = 0.48860251190291992*z; break;
    case key(1,1): p = 0.48860251190291992*x; break;
    case key(2,-2): p = 1.0925484305920792*x*y; break;
    case key(2,-1): p = 1.0925484305920792*y*z; break;
    case key(2,0): p = -0.31539156525251999*x*x - 0.31539156525251999*y*y + 0.63078313050503998*z*z; break;
    case key(2,1): p = 1.0925484305920792*x*z; break;
    case key(2,2): p = 0.54627421529603959*x*x - 0.54627421529603959*y*y; break;
    case key(3,-3): p = 1.7701307697799304*x*x*y - 0.59004358992664352*y*y*y; break;
    case key(3,-2): p = 2.8906114426405543*x*y*z; break;
    case key(3,-1): p = -0.45704579946446572*x*x*y - 0.45704579946446572*y*y*y + 1.8281831978578629*y*z*z; break;
    case key(3,0): p = -1.1195289977703462*x*x*z - 1.1195289977703462*y*y*z + 0.7463526651802308*z*z*z; break;
    case key(3,1): p = -0.45704579946446572*x*x*x - 0.45704579946446572*x*y*y + 1.8281831978578629*x*z*z; break;
    case key(3,2): p = 1.4453057213202771*x*x*z - 1.4453057213202771*y*y*z; break;
    case key(3,3): p = 0.59004358992664352*x*x*x - 1.7701307697799304*x*y*y; break;
    case key(4,-4): p = 2.5033429417967046*x*x*x*y - 2.5033429417967046*x*y*y*y; break;
    case key(4,-3): p = 5.3103923093397913*x*x*y*z - 1.7701307697799304*y*y*y*z; break;
    case key(4,-2): p = -0.94617469575755997*x*x*x*y - 0.94617469575755997*x*y*y*y + 5.6770481745453605*x*y*z*z; break;
    case key(4,-1): p = -2.0071396306718676*x*x*y*z - 2.0071396306718676*y*y*y*z + 2.6761861742291568*y*z*z*z; break;
    case key(4,0): p = 0.31735664074561293*x*x*x*x + 0.63471328149122586*x*x*y*y - 2.5388531259649034*x*x*z*z + 0.31735664074561293*y*y*y*y - 2.5388531259649034*y*y*z*z + 0.84628437532163447*z*z*z*z; break;
    case key(4,1): p = -2.0071396306718676*x*x*x*z - 2.0071396306718676*x*y*y*z + 2.6761861742291568*x*z*z*z; break;
    case key(4,2): p = -0.47308734787877998*x*x*x*x + 2.8385240872726802*x*x*z*z + 0.47308734787877998*y*y*y*y - 2.8385240872726802*y*y*z*z; break;
    case key(4,3): p = 1.7701307697799304*x*x*x*z - 5.3103923093397913*x*y*y*z; break;
    case key(4,4): p = 0.62583573544917614*x*x*x*x - 3.7550144126950569*x*x*y*y + 0.62583573544917614*y*y*y*y; break;
    default:
      throw ConfigError("spherical harmonic degree/order out of range: l=" +
                        std::to_string(l) + " m=" + std::to_string(m));
  }
  (void)x; (void)y; (void)z;
  return p;
}

Vec3 solid_harmonic_gradient(int l, int m, const Vec3& v) {
  const double x = v[0], y = v[1], z = v[2];
  Vec3 g;
  switch (key(l, m)) {
    case key(0,0): g << 0, 0, 0; break;
    case key(1,-1): g << 0, 0.48860251190291992, 0; break;
    case key(1,0): g << 0, 0, 0.48860251190291992; break;
    case key(1,1): g << 0.48860251190291992, 0, 0; break;
    case key(2,-2): g << 1.0925484305920792*y, 1.0925484305920792*x, 0; break;
    case key(2,-1): g << 0, 1.0925484305920792*z, 1.0925484305920792*y; break;
    case key(2,0): g << -0.63078313050503998*x, -0.63078313050503998*y, 1.26156626101008*z; break;
    case key(2,1): g << 1.0925484305920792*z, 0, 1.0925484305920792*x; break;
    case key(2,2): g << 1.0925484305920792*x, -1.0925484305920792*y, 0; break;
    case key(3,-3): g << 3.5402615395598609*x*y, 1.7701307697799304*x*x - 1.7701307697799304*y*y, 0; break;
    case key(3,-2): g << 2.8906114426405543*y*z, 2.8906114426405543*x*z, 2.8906114426405543*x*y; break;
    case key(3,-1): g << -0.91409159892893144*x*y, -0.45704579946446572*x*x - 1.3711373983933972*y*y + 1.8281831978578629*z*z, 3.6563663957157257*y*z; break;
    case key(3,0): g << -2.2390579955406924*x*z, -2.2390579955406924*y*z, -1.1195289977703462*x*x - 1.1195289977703462*y*y + 2.2390579955406924*z*z; break;
    case key(3,1): g << -1.3711373983933972*x*x - 0.45704579946446572*y*y + 1.8281831978578629*z*z, -0.91409159892893144*x*y, 3.6563663957157257*x*z; break;
    case key(3,2): g << 2.8906114426405543*x*z, -2.8906114426405543*y*z, 1.4453057213202771*x*x - 1.4453057213202771*y*y; break;
    case key(3,3): g << 1.7701307697799304*x*x - 1.7701307697799304*y*y, -3.5402615395598609*x*y, 0; break;
    case key(4,-4): g << 7.5100288253901137*x*x*y - 2.5033429417967046*y*y*y, 2.5033429417967046*x*x*x - 7.5100288253901137*x*y*y, 0; break;
    case key(4,-3): g << 10.620784618679583*x*y*z, 5.3103923093397913*x*x*z - 5.3103923093397913*y*y*z, 5.3103923093397913*x*x*y - 1.7701307697799304*y*y*y; break;
    case key(4,-2): g << -2.8385240872726802*x*x*y - 0.94617469575755997*y*y*y + 5.6770481745453605*y*z*z, -0.94617469575755997*x*x*x - 2.8385240872726802*x*y*y + 5.6770481745453605*x*z*z, 11.354096349090721*x*y*z; break;
    case key(4,-1): g << -4.0142792613437353*x*y*z, -2.0071396306718676*x*x*z - 6.0214188920156024*y*y*z + 2.6761861742291568*z*z*z, -2.0071396306718676*x*x*y - 2.0071396306718676*y*y*y + 8.0285585226874705*y*z*z; break;
    case key(4,0): g << 1.2694265629824517*x*x*x + 1.2694265629824517*x*y*y - 5.0777062519298068*x*z*z, 1.2694265629824517*x*x*y + 1.2694265629824517*y*y*y - 5.0777062519298068*y*z*z, -5.0777062519298068*x*x*z - 5.0777062519298068*y*y*z + 3.3851375012865379*z*z*z; break;
    case key(4,1): g << -6.0214188920156024*x*x*z - 2.0071396306718676*y*y*z + 2.6761861742291568*z*z*z, -4.0142792613437353*x*y*z, -2.0071396306718676*x*x*x - 2.0071396306718676*x*y*y + 8.0285585226874705*x*z*z; break;
    case key(4,2): g << -1.8923493915151199*x*x*x + 5.6770481745453605*x*z*z, 1.8923493915151199*y*y*y - 5.6770481745453605*y*z*z, 5.6770481745453605*x*x*z - 5.6770481745453605*y*y*z; break;
    case key(4,3): g << 5.3103923093397913*x*x*z - 5.3103923093397913*y*y*z, -10.620784618679583*x*y*z, 1.7701307697799304*x*x*x - 5.3103923093397913*x*y*y; break;
    case key(4,4): g << 2.5033429417967046*x*x*x - 7.5100288253901137*x*y*y, -7.5100288253901137*x*x*y + 2.5033429417967046*y*y*y, 0; break;
    default:
      throw ConfigError("spherical harmonic degree/order out of range: l=" +
                        std::to_string(l) + " m=" + std::to_string(m));
  }
  (void)x; (void)y; (void)z;
  return g;
}

double sphere_harmonic(int l, int m, const Vec3& x) {
  const double r = x.norm();
  if (r == 0.0) throw EvaluationError("sphere_harmonic at the origin");
  return solid_harmonic(l, m, x) / std::pow(r, l);
}

Vec3 sphere_harmonic_gradient(int l, int m, const Vec3& x) {
  const double r = x.norm();
  if (r == 0.0) throw EvaluationError("sphere_harmonic_gradient at the origin");
  const double rl = std::pow(r, l);
  const double p = solid_harmonic(l, m, x);
  return solid_harmonic_gradient(l, m, x) / rl - (l * p / (rl * r * r)) * x;
}

}  // namespace capsense
