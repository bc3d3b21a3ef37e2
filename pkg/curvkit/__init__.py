"""
curvkit: comparison geometry on finite samples
Contains modules:
- model_plane   (model trigonometry and model spaces)
- metric_core   (finite metrics, sampled spaces, nets)
- comparison    (CBB/CAT four-point tests and their relatives)
- extension     (Kirszbraun, barycenters, webs, Reshetnyak fold)
- flows         (gradient and radial curves, developments)
- warped        (cones, suspensions, doublings, warped distances)
- formats, config, suite
"""
