from rubbleforge.rng import SplitMix64, derive_seed, mix64


class TestSplitMix64:
    def test_known_sequence_is_stable(self):
        # frozen so cross-language reimplementations can be checked
        rng = SplitMix64(1234567)
        assert [rng.next_u64() for _ in range(3)] == [
            6457827717110365317,
            3203168211198807973,
            9817491932198370423,
        ]

    def test_same_seed_same_stream(self):
        a, b = SplitMix64(9), SplitMix64(9)
        assert [a.next_u64() for _ in range(50)] == \
               [b.next_u64() for _ in range(50)]

    def test_uniform_range(self):
        rng = SplitMix64(3)
        vals = [rng.uniform(-2.0, 5.0) for _ in range(2000)]
        assert all(-2.0 <= v < 5.0 for v in vals)
        assert min(vals) < -1.0 and max(vals) > 4.0

    def test_spawn_streams_differ(self):
        rng = SplitMix64(7)
        child_a, child_b = rng.spawn(), rng.spawn()
        assert child_a.next_u64() != child_b.next_u64()


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(5, 1, 2) == derive_seed(5, 1, 2)

    def test_order_sensitive(self):
        assert derive_seed(5, 1, 2) != derive_seed(5, 2, 1)

    def test_part_count_sensitive(self):
        assert derive_seed(5, 1) != derive_seed(5, 1, 0)

    def test_mix_is_not_identity(self):
        assert mix64(1) != 1
        assert mix64(2) != 2
