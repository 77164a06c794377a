#pragma once

#include <stdexcept>
#include <string>

namespace palmgrasp {

/// Base of every error this library throws. Each subclass names one failure
/// mode so callers can catch exactly the condition they can recover from.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define PALMGRASP_DEFINE_ERROR(Name)          \
    class Name : public Error {               \
    public:                                   \
        using Error::Error;                   \
    }

// geometry
PALMGRASP_DEFINE_ERROR(InvalidShape);
PALMGRASP_DEFINE_ERROR(FeatureOutOfWorkspace);
PALMGRASP_DEFINE_ERROR(CatalogParseError);

// tactile_sim
PALMGRASP_DEFINE_ERROR(OverIndentation);
PALMGRASP_DEFINE_ERROR(ImageFormatError);

// similarity
PALMGRASP_DEFINE_ERROR(DimensionMismatch);

// datasets
PALMGRASP_DEFINE_ERROR(CorruptManifest);
PALMGRASP_DEFINE_ERROR(MissingImage);

// pose_models
PALMGRASP_DEFINE_ERROR(ClassUnderflow);
PALMGRASP_DEFINE_ERROR(ModelFormatError);

// grasp_control
PALMGRASP_DEFINE_ERROR(NoContact);
PALMGRASP_DEFINE_ERROR(AdjustDiverged);
PALMGRASP_DEFINE_ERROR(EdgeNotFound);
PALMGRASP_DEFINE_ERROR(WorkspaceExceeded);
PALMGRASP_DEFINE_ERROR(ObjectLost);

// runner
PALMGRASP_DEFINE_ERROR(InvalidConfig);
PALMGRASP_DEFINE_ERROR(MissingArtifact);

#undef PALMGRASP_DEFINE_ERROR

}  // namespace palmgrasp
