// SPDX-License-Identifier: Apache-2.0
#include "sdfscene/render.hpp"

namespace sdfscene {

RenderedViews render_views(const SceneDoc& doc, const FieldSet& fields, const RayMarchConfig& cfg) {
    const SceneRender sr = render_scene(doc.latent, fields, doc.camera, cfg);
    RenderedViews out;
    out.rgb = sr.color;
    out.depth = sr.depth;
    out.ids = ImageMask(doc.camera.width, doc.camera.height, 0);
    for (size_t i = 0; i < sr.winner.pixels.size(); ++i) {
        const int32_t w = sr.winner.pixels[i];
        out.ids.pixels[i] = w < 0 ? 0 : static_cast<uint8_t>(w + 1);
    }
    return out;
}

} // namespace sdfscene
