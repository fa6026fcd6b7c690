/**
 * Coordinate mapping between workspace units and canvas pixels.
 *
 * The workspace is the square [-h, h]^2 with y pointing up; the canvas has
 * y pointing down. A point at workspace (0.3, 0.4) with h = 0.5 lands at
 * 80% of the canvas width and 90% of its height measured from the bottom.
 */

export interface CanvasSize {
  width: number;
  height: number;
}

export interface Point {
  x: number;
  y: number;
}

export const WORKSPACE_HALF_EXTENT = 0.5;

export function clampToWorkspace(p: Point, h: number = WORKSPACE_HALF_EXTENT): Point {
  return {
    x: Math.min(h, Math.max(-h, p.x)),
    y: Math.min(h, Math.max(-h, p.y)),
  };
}

export function workspaceToCanvas(
  p: Point,
  size: CanvasSize,
  h: number = WORKSPACE_HALF_EXTENT,
): Point {
  return {
    x: ((p.x + h) / (2 * h)) * size.width,
    y: ((h - p.y) / (2 * h)) * size.height,
  };
}

export function canvasToWorkspace(
  p: Point,
  size: CanvasSize,
  h: number = WORKSPACE_HALF_EXTENT,
): Point {
  const raw = {
    x: (p.x / size.width) * 2 * h - h,
    y: h - (p.y / size.height) * 2 * h,
  };
  return clampToWorkspace(raw, h);
}
