#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wildfusion/datetime.hpp"
#include "wildfusion/manifest.hpp"

namespace wildfusion {

struct Station {
  int id = 0;
  double latitude = 0.0;
  double longitude = 0.0;
};

struct WeatherReading {
  int station_id = 0;
  DateTime timestamp;
  double temperature_celsius = 0.0;
};

// Pluggable observation source. Implementations must tolerate concurrent
// reads.
class WeatherSource {
 public:
  virtual ~WeatherSource() = default;

  virtual std::vector<Station> stations() = 0;

  // Readings from one station within [center - window, center + window]
  // hours, in any order.
  virtual std::vector<WeatherReading> readings(int station_id,
                                               const DateTime& center,
                                               double window_hours) = 0;
};

// Station table plus readings from a local JSON file:
//   {"stations":[{"id":..,"lat":..,"lon":..}],
//    "readings":[{"station_id":..,"time":"...","temperature_c":..}]}
class FileWeatherSource : public WeatherSource {
 public:
  explicit FileWeatherSource(const std::filesystem::path& path);

  std::vector<Station> stations() override;
  std::vector<WeatherReading> readings(int station_id, const DateTime& center,
                                       double window_hours) override;

 private:
  std::vector<Station> stations_;
  std::vector<WeatherReading> readings_;
};

// Frost-style HTTP client: GET <endpoint>/stations and
// GET <endpoint>/observations?source=<id>&from=<iso>&to=<iso>, with the
// credential (when the environment variable is set) sent as basic auth.
class HttpWeatherSource : public WeatherSource {
 public:
  HttpWeatherSource(std::string endpoint, std::string credential_env_var);
  ~HttpWeatherSource() override;

  std::vector<Station> stations() override;
  std::vector<WeatherReading> readings(int station_id, const DateTime& center,
                                       double window_hours) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

double haversine_km(double lat1, double lon1, double lat2, double lon2);

// The backfill rule: the geographically nearest station (great-circle
// distance, ties to the lower station id) is consulted; if it has a reading
// within +-window hours, the temporally closest one wins, otherwise the
// lookup is empty. No fallback to farther stations.
std::optional<double> lookup_temperature(WeatherSource& source, double latitude,
                                         double longitude,
                                         const DateTime& timestamp,
                                         double window_hours = 24.0);

// Fills a missing temperature from the source; existing temperatures are
// never overwritten. Best-effort: source failures leave the record unchanged
// and are reported through `failure` when given.
SampleRecord backfill_temperature(const SampleRecord& record,
                                  WeatherSource& source,
                                  std::string* failure = nullptr);

}  // namespace wildfusion
