#pragma once

// Scalar type for all numeric code. f64 is the default; f32 is an opt-in
// throughput mode (configure with -DDBCD_REAL32=ON) and is excluded from
// tolerance-based tests.
namespace dbcd {

#if defined(DBCD_REAL32)
using real = float;
#else
using real = double;
#endif

} // namespace dbcd
