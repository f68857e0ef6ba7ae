from dvcheck import bench, topogen


def test_generators():
    g = topogen.line(5)
    assert g.topo.devices == ["n00", "n01", "n02", "n03", "n04"] and len(g.net.nodes) == 5
    ft = topogen.fat_tree(4)
    assert len(ft.topo.devices) == 20
    assert ft.source == "e0_0" and ft.dest == "e3_1"
    assert len(topogen.interior(5)) == 16
    dag = topogen.random_dag(10, 3)
    assert dag.net.root.device == "r00"


def test_line_traffic_equals_distance():
    rows = bench.sweep_line((4, 8))
    assert all(r["messages"] == r["distance"] for r in rows)


def test_grid_flips_are_silent():
    rows = bench.sweep_grid((3, 5))
    assert len(rows) == 4 + 16
    assert all(r["messages"] == 0 for r in rows)


def test_csv_and_no_output_dir():
    tables = bench.run_bench(None, quick=True)
    assert set(tables) == {"line", "grid", "fat_tree", "random_dag"}
    text = bench.to_csv(tables["grid"])
    assert text.splitlines()[0] == "n,node,from,to,messages"
    assert bench.to_csv([]) == ""
