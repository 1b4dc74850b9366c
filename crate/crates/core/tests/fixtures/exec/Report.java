import java.util.List;

public class Report {
    static String render(List<String> names) {
        StringBuilder sb = new StringBuilder();
        sb.append("names:");
        for (String n : names) {
            sb.append(' ').append(n.toUpperCase());
        }
        sb.append('\n');
        sb.append("count: ").append(names.size());
        return sb.toString();
    }

    public static void main(String[] args) {
        System.out.println(render(List.of("ada", "grace", "barbara")));
        System.out.println(render(List.of()));
    }
}
