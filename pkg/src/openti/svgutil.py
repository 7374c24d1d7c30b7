"""Tiny deterministic SVG writer.

All renderers in this package emit byte-stable SVG: fixed attribute order,
fixed float formatting, no timestamps. Matplotlib is deliberately avoided
because its output embeds versions and dictionaries with unstable order.
"""


def fmt(v) -> str:
    """Format a coordinate with two decimals, stripping negative zero."""
    s = f"{float(v):.2f}"
    return "0.00" if s == "-0.00" else s


class SvgCanvas:
    def __init__(self, width: float, height: float, background: str = "#ffffff"):
        self.width = width
        self.height = height
        self._parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{fmt(width)}" '
            f'height="{fmt(height)}" viewBox="0 0 {fmt(width)} {fmt(height)}">',
            f'<rect x="0.00" y="0.00" width="{fmt(width)}" height="{fmt(height)}" '
            f'fill="{background}"/>',
        ]

    def rect(self, x, y, w, h, fill, stroke="none", stroke_width=1.0):
        self._parts.append(
            f'<rect x="{fmt(x)}" y="{fmt(y)}" width="{fmt(w)}" height="{fmt(h)}" '
            f'fill="{fill}" stroke="{stroke}" stroke-width="{fmt(stroke_width)}"/>'
        )

    def line(self, x1, y1, x2, y2, stroke="#000000", stroke_width=1.0):
        self._parts.append(
            f'<line x1="{fmt(x1)}" y1="{fmt(y1)}" x2="{fmt(x2)}" y2="{fmt(y2)}" '
            f'stroke="{stroke}" stroke-width="{fmt(stroke_width)}"/>'
        )

    def polyline(self, points, stroke="#000000", stroke_width=1.5):
        pts = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in points)
        self._parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" '
            f'stroke-width="{fmt(stroke_width)}"/>'
        )

    def circle(self, cx, cy, r, fill="#000000"):
        self._parts.append(
            f'<circle cx="{fmt(cx)}" cy="{fmt(cy)}" r="{fmt(r)}" fill="{fill}"/>'
        )

    def text(self, x, y, content, size=12, fill="#000000", anchor="start"):
        content = (
            str(content)
            .replace("&", "&amp;")
            .replace("<", "&lt;")
            .replace(">", "&gt;")
        )
        self._parts.append(
            f'<text x="{fmt(x)}" y="{fmt(y)}" font-size="{fmt(size)}" '
            f'font-family="monospace" fill="{fill}" text-anchor="{anchor}">{content}</text>'
        )

    def render(self) -> str:
        return "\n".join(self._parts + ["</svg>"]) + "\n"

    def write(self, path) -> str:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.render())
        return str(path)


def gray(value: float) -> str:
    """Map value in [0, 1] to a grayscale fill, 0 -> white, 1 -> black."""
    v = max(0.0, min(1.0, float(value)))
    level = round(255 * (1.0 - v))
    return f"#{level:02x}{level:02x}{level:02x}"
