"""Class APs and mAPs as reported for the front-view nuScenes and View-of-Delft
experiments, transcribed cell by cell. Keys are (modality, pretrained)."""

# (mAP, pedestrian, cyclist, car)
NUSCENES = {
    ("radar", False): (12.5, 3.1, 5.4, 29.0),
    ("camera", False): (27.7, 26.7, 17.3, 39.1),
    ("radar-camera", False): (40.6, 36.6, 26.4, 58.9),
}

# variant -> (mAP, pedestrian, cyclist, car)
VOD = {
    ("radar", False): {
        "2d": (48.5, 34.1, 68.3, 43.2), "bev": (49.1, 32.0, 66.6, 48.7), "3d": (43.7, 29.4, 65.4, 36.3),
    },
    ("camera", False): {
        "2d": (32.1, 24.5, 40.5, 31.3), "bev": (14.2, 9.8, 14.2, 18.5), "3d": (12.1, 9.6, 12.5, 14.0),
    },
    ("radar-camera", False): {
        "2d": (53.1, 43.2, 71.5, 44.6), "bev": (53.5, 40.6, 67.7, 52.3), "3d": (48.0, 37.2, 67.2, 39.7),
    },
    ("camera", True): {
        "2d": (49.6, 39.2, 58.5, 51.2), "bev": (21.5, 12.6, 26.6, 25.4), "3d": (16.9, 11.4, 21.6, 17.7),
    },
    ("radar-camera", True): {
        "2d": (58.2, 50.0, 72.0, 52.7), "bev": (55.7, 39.4, 69.2, 58.5), "3d": (47.7, 35.0, 67.7, 40.4),
    },
}


def all_cells():
    """``(name, reported_map, {class: ap})`` for every mAP cell."""
    cells = []
    for (modality, pre), (m, ped, cyc, car) in NUSCENES.items():
        cells.append((f"nuscenes/{modality}", m, {"pedestrian": ped, "cyclist": cyc, "car": car}))
    for (modality, pre), variants in VOD.items():
        for variant, (m, ped, cyc, car) in variants.items():
            name = f"vod/{modality}{'/pretrained' if pre else ''}/{variant}"
            cells.append((name, m, {"pedestrian": ped, "cyclist": cyc, "car": car}))
    return cells
