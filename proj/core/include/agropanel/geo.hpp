// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

namespace agropanel {

inline constexpr double kEarthRadiusKm = 6371.0;

/// Great-circle length of one degree of arc, km.
inline constexpr double kKmPerDegree = 111.195;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

/// Great-circle distance in km (haversine on a sphere of radius 6371 km).
inline double haversine_km(double lat1, double lon1, double lat2,
                           double lon2) {
  constexpr double deg = 0.017453292519943295;  // pi / 180
  double phi1 = lat1 * deg;
  double phi2 = lat2 * deg;
  double dphi = (lat2 - lat1) * deg;
  double dlam = (lon2 - lon1) * deg;
  double sp = std::sin(dphi / 2);
  double sl = std::sin(dlam / 2);
  double a = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
  if (a > 1.0) a = 1.0;
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(a));
}

inline double haversine_km(const LatLon& a, const LatLon& b) {
  return haversine_km(a.lat, a.lon, b.lat, b.lon);
}

}  // namespace agropanel
