#include "gridsizer/frame/sections.hpp"

#include <array>

namespace gridsizer::frame {

namespace {

using skel::BarKind;

// Generated by tools/oracles/section_table.py: square-corner box formulas on
// nominal wall thickness for the tubes, three-plate idealisation of the
// published W21 dimensions. Unit weight = area * 490 pcf.
constexpr std::array<Section, 14> kLibrary{{
    {"HSSQ 16x16x0.375", BarKind::column, 23.4375, 954.2236328125, 954.2236328125, 1430.511474609375, 79.75260416666667},
    {"HSSQ 16x16x0.5", BarKind::column, 31.0, 1242.5833333333333, 1242.5833333333333, 1861.9375, 105.48611111111111},
    {"HSSQ 16x16x0.625", BarKind::column, 38.4375, 1516.8798828125, 1516.8798828125, 2271.566162109375, 130.79427083333334},
    {"HSSQ 16x16x0.75", BarKind::column, 45.75, 1777.578125, 1777.578125, 2659.93359375, 155.67708333333334},
    {"HSSQ 16x16x0.875", BarKind::column, 52.9375, 2025.1350911458333, 2025.1350911458333, 3027.570068359375, 180.13454861111111},
    {"W 21 x 44", BarKind::beam, 12.780000000000001, 826.2182249999987, 20.66761875, 0.6842812500000001, 43.487500000000004},
    {"W 21 x 48", BarKind::beam, 13.909400000000002, 936.4502430866663, 38.72417136166668, 0.7197209033333333, 47.330597222222224},
    {"W 21 x 50", BarKind::beam, 14.4845, 960.7263592041667, 24.91823807916667, 1.0372879258333334, 49.287534722222226},
    {"W 21 x 57", BarKind::beam, 16.547, 1153.8887166666675, 30.69215477291666, 1.6538586854166668, 56.30576388888889},
    {"W 21 x 62", BarKind::beam, 18.0432, 1310.8076024400004, 57.45175296, 1.7126753399999999, 61.397},
    {"W 21 x 68", BarKind::beam, 19.8138, 1456.1526270600014, 64.704449235, 2.3131359108333336, 67.42195833333334},
    {"W 21 x 73", BarKind::beam, 21.2566, 1576.8876444533344, 70.67519270958336, 2.8846587441666665, 72.3314861111111},
    {"W 21 x 83", BarKind::beam, 24.122149999999998, 1806.5413519279173, 81.53646845697915, 4.181029671458332, 82.08231597222222},
    {"W 21 x 93", BarKind::beam, 27.110400000000002, 2045.7182563200004, 92.84785087999998, 5.859445640000001, 92.25066666666667},
}};

}  // namespace

std::span<const Section> section_library() { return kLibrary; }
std::span<const Section> column_sections() { return std::span(kLibrary).subspan(0, skel::kColumnSections); }
std::span<const Section> beam_sections() { return std::span(kLibrary).subspan(skel::kColumnSections); }

const Section& section_properties(const std::string& name) {
  for (const auto& s : kLibrary)
    if (s.name == name) return s;
  throw UnknownSection("unknown section designation '" + name + "'");
}

const Section& section_for(skel::BarKind kind, int index) {
  const auto lib = kind == BarKind::column ? column_sections() : beam_sections();
  if (index < 0 || index >= static_cast<int>(lib.size()))
    throw UnknownSection("section index " + std::to_string(index) + " out of range for a " +
                         skel::to_string(kind));
  return lib[static_cast<std::size_t>(index)];
}

}  // namespace gridsizer::frame
