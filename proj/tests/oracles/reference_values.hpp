#pragma once

// Generated by reference_values.py (30-digit arithmetic).

namespace ref
{

inline constexpr double kBoundaryReturnV0Eps1 = 1.3130352854993313036;
inline constexpr double kP1V1 = 2.3130352854993313036;
inline constexpr double kP1V05 = 1.5819767068693264244;
inline constexpr double kBracketV1 = 0.58897362453302083723;
inline constexpr double kPropagatorV1Tau03 = 1.4718516307204854353;
inline constexpr double kPropagatorVm2Tau002 = 3.4340795229042507664;
inline constexpr double kM2V0Tau03 = 0.24768158780715293517;
inline constexpr double kM3V05Tau2 = 51.712459631367927704;
inline constexpr double kProbAnyV0Tau005 = 0.25231325217775469308;
inline constexpr double kProbAnyV1Tau1 = 0.9963481941049896353;
inline constexpr double kLossPdfV0Tau005X01 = 0.75182963405493972002;

} // namespace ref
