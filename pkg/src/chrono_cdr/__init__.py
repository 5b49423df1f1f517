"""Batch analytics for circadian-rhythm indicators in mobile-network activity data.

The package turns raw call-detail-record dumps into wake-up time, bedtime,
day length and working-hours estimates per area of a city, together with
home/work inference, mobility metrics (radius of gyration, entropy), a
Voronoi tessellation of the antenna sites, and socioeconomic stratification
of the results. A synthetic-data generator with planted ground truth backs
the end-to-end validation.
"""

__version__ = "0.1.0"
