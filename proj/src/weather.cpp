#include "wildfusion/weather.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "httplib.h"
#include "json.hpp"
#include "wildfusion/errors.hpp"

namespace wildfusion {

namespace {
using nlohmann::json;
}

FileWeatherSource::FileWeatherSource(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open weather file '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("weather file '" + path.string() + "': " + e.what());
  }
  for (const auto& s : j.at("stations")) {
    stations_.push_back({s.at("id").get<int>(), s.at("lat").get<double>(),
                         s.at("lon").get<double>()});
  }
  for (const auto& r : j.at("readings")) {
    readings_.push_back({r.at("station_id").get<int>(),
                         parse_datetime(r.at("time").get<std::string>()),
                         r.at("temperature_c").get<double>()});
  }
}

std::vector<Station> FileWeatherSource::stations() { return stations_; }

std::vector<WeatherReading> FileWeatherSource::readings(int station_id,
                                                        const DateTime& center,
                                                        double window_hours) {
  std::vector<WeatherReading> out;
  for (const auto& r : readings_) {
    if (r.station_id != station_id) continue;
    if (std::abs(hours_between(center, r.timestamp)) <= window_hours) {
      out.push_back(r);
    }
  }
  return out;
}

struct HttpWeatherSource::Impl {
  std::string host;
  std::string base_path;
  std::string credential;

  nlohmann::json get_json(const std::string& path) const;
};

nlohmann::json HttpWeatherSource::Impl::get_json(
    const std::string& path) const {
  httplib::Client client(host);
  client.set_connection_timeout(5);
  client.set_read_timeout(10);
  if (!credential.empty()) {
    client.set_basic_auth(credential, "");
  }
  auto res = client.Get(base_path + path);
  if (!res) {
    throw DataError("weather service unreachable: " + host + path);
  }
  if (res->status != 200) {
    throw DataError("weather service returned HTTP " +
                    std::to_string(res->status) + " for " + path);
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw DataError(std::string("weather service: bad JSON: ") + e.what());
  }
}

HttpWeatherSource::HttpWeatherSource(std::string endpoint,
                                     std::string credential_env_var)
    : impl_(std::make_unique<Impl>()) {
  // Split "http://host:port/base" into host part and path part.
  std::string rest = endpoint;
  const auto scheme = rest.find("//");
  const auto path_start =
      rest.find('/', scheme == std::string::npos ? 0 : scheme + 2);
  if (path_start == std::string::npos) {
    impl_->host = rest;
  } else {
    impl_->host = rest.substr(0, path_start);
    impl_->base_path = rest.substr(path_start);
    if (impl_->base_path == "/") impl_->base_path.clear();
  }
  if (!credential_env_var.empty()) {
    if (const char* cred = std::getenv(credential_env_var.c_str())) {
      impl_->credential = cred;
    }
  }
}

HttpWeatherSource::~HttpWeatherSource() = default;

std::vector<Station> HttpWeatherSource::stations() {
  const json j = impl_->get_json("/stations");
  std::vector<Station> out;
  for (const auto& s : j.at("data")) {
    out.push_back({s.at("id").get<int>(), s.at("lat").get<double>(),
                   s.at("lon").get<double>()});
  }
  return out;
}

std::vector<WeatherReading> HttpWeatherSource::readings(int station_id,
                                                        const DateTime& center,
                                                        double window_hours) {
  const auto shift = [&](double hours) {
    return from_epoch_seconds(to_epoch_seconds(center) +
                              static_cast<std::int64_t>(hours * 3600.0));
  };
  const std::string query = "/observations?source=" +
                            std::to_string(station_id) +
                            "&from=" + format_datetime(shift(-window_hours)) +
                            "&to=" + format_datetime(shift(window_hours));
  const json j = impl_->get_json(query);
  std::vector<WeatherReading> out;
  for (const auto& r : j.at("data")) {
    WeatherReading reading{r.at("station_id").get<int>(),
                           parse_datetime(r.at("time").get<std::string>()),
                           r.at("temperature_c").get<double>()};
    if (std::abs(hours_between(center, reading.timestamp)) <= window_hours) {
      out.push_back(reading);
    }
  }
  return out;
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kEarthRadiusKm = 6371.0;
  constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
  const double dlat = (lat2 - lat1) * kDegToRad;
  const double dlon = (lon2 - lon1) * kDegToRad;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * kDegToRad) * std::cos(lat2 * kDegToRad) *
                       std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

std::optional<double> lookup_temperature(WeatherSource& source,
                                         double latitude, double longitude,
                                         const DateTime& timestamp,
                                         double window_hours) {
  const auto stations = source.stations();
  if (stations.empty()) return std::nullopt;

  const Station* nearest = nullptr;
  double best_dist = 0.0;
  for (const auto& s : stations) {
    const double d = haversine_km(latitude, longitude, s.latitude, s.longitude);
    if (nearest == nullptr || d < best_dist ||
        (d == best_dist && s.id < nearest->id)) {
      nearest = &s;
      best_dist = d;
    }
  }

  const auto readings =
      source.readings(nearest->id, timestamp, window_hours);
  const WeatherReading* best = nullptr;
  double best_gap = 0.0;
  for (const auto& r : readings) {
    const double gap = std::abs(hours_between(timestamp, r.timestamp));
    if (gap > window_hours) continue;
    if (best == nullptr || gap < best_gap) {
      best = &r;
      best_gap = gap;
    }
  }
  if (best == nullptr) return std::nullopt;
  return best->temperature_celsius;
}

SampleRecord backfill_temperature(const SampleRecord& record,
                                  WeatherSource& source, std::string* failure) {
  if (record.temperature_celsius.has_value()) return record;
  SampleRecord out = record;
  try {
    out.temperature_celsius = lookup_temperature(
        source, record.latitude, record.longitude, record.timestamp);
  } catch (const std::exception& e) {
    if (failure) *failure = e.what();
  }
  return out;
}

}  // namespace wildfusion
